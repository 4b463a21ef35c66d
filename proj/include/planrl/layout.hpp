#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace planrl {

/*
  Plain-text grid maps. A layout file holds a character grid ('#' wall,
  '.' floor, 'D' door cell) followed by a manifest that names every region
  and object consistently with the planning annotation:

      family: minigrid
      grid:
      ########
      #...#..#
      ...
      room: r-0-0 1 1 6 3        (top left bottom right, inclusive)
      door: d-yellow-0-0-1-0 3 4 r-0-0 r-1-0 locked
      key: k-yellow-0 r-0-0
      ball: r-1-0
      start: r-0-0
      goal: r-1-0

  Rooms are rectangles; every floor cell must lie in exactly one room.
  In the rooms family the single-cell openings between rooms are rooms of
  their own (the "c-..." corridor regions of the annotation).
*/

enum class Family { Minigrid, Rooms };

struct LayoutError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Rect {
    int top, left, bottom, right; // inclusive

    bool contains(int row, int col) const {
        return row >= top && row <= bottom && col >= left && col <= right;
    }
};

struct RoomDef {
    std::string name;
    Rect rect;

    bool is_corridor() const { return name.starts_with("c-"); }
};

struct DoorDef {
    std::string name;
    int row, col;
    int room1, room2; // indices into rooms
    bool locked_initially;
};

struct KeyDef {
    std::string name;
    int spawn_room;
};

struct GridLayout {
    Family family = Family::Minigrid;
    std::vector<std::string> grid;
    std::vector<RoomDef> rooms;
    std::vector<DoorDef> doors;
    std::vector<KeyDef> keys;
    std::vector<int> ball_rooms;
    int start_room = -1;
    int goal_room = -1;

    int rows = 0, cols = 0;
    std::vector<int16_t> room_of_cell; // room index; doors resolve to room1; -1 for walls
    std::vector<int16_t> door_of_cell; // door index or -1

    int cell(int row, int col) const { return row * cols + col; }
    int row_of(int cell) const { return cell / cols; }
    int col_of(int cell) const { return cell % cols; }

    bool is_wall(int cell) const {
        return grid[row_of(cell)][col_of(cell)] == '#';
    }

    int find_room(const std::string &name) const {
        for (size_t i = 0; i < rooms.size(); ++i)
            if (rooms[i].name == name)
                return (int)i;
        return -1;
    }

    std::vector<int> room_cells(int room) const {
        std::vector<int> cells;
        const Rect &r = rooms[room].rect;
        for (int row = r.top; row <= r.bottom; ++row)
            for (int col = r.left; col <= r.right; ++col)
                if (grid[row][col] == '.')
                    cells.push_back(cell(row, col));
        return cells;
    }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string &line) {
    std::vector<std::string> parts;
    std::istringstream is(line);
    std::string word;
    while (is >> word)
        parts.push_back(word);
    return parts;
}

} // namespace detail

inline GridLayout parse_layout(const std::string &text) {
    GridLayout layout;
    std::istringstream in(text);
    std::string line;
    bool in_grid = false;
    bool saw_family = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (in_grid) {
            if (line.empty() || (line[0] != '#' && line[0] != '.' && line[0] != 'D')) {
                in_grid = false;
            } else {
                layout.grid.push_back(line);
                continue;
            }
        }
        if (line.empty() || line[0] == ';')
            continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw LayoutError("bad layout line: " + line);
        std::string key = line.substr(0, colon);
        auto args = detail::split_ws(line.substr(colon + 1));
        if (key == "family") {
            saw_family = true;
            if (args.size() != 1)
                throw LayoutError("family expects one value");
            if (args[0] == "minigrid")
                layout.family = Family::Minigrid;
            else if (args[0] == "rooms")
                layout.family = Family::Rooms;
            else
                throw LayoutError("unknown family " + args[0]);
        } else if (key == "grid") {
            in_grid = true;
        } else if (key == "room") {
            if (args.size() != 5)
                throw LayoutError("room expects: name top left bottom right");
            RoomDef r;
            r.name = args[0];
            r.rect = {std::stoi(args[1]), std::stoi(args[2]), std::stoi(args[3]),
                      std::stoi(args[4])};
            layout.rooms.push_back(r);
        } else if (key == "door") {
            if (args.size() != 6)
                throw LayoutError("door expects: name row col room1 room2 state");
            DoorDef d;
            d.name = args[0];
            d.row = std::stoi(args[1]);
            d.col = std::stoi(args[2]);
            d.room1 = layout.find_room(args[3]);
            d.room2 = layout.find_room(args[4]);
            if (d.room1 < 0 || d.room2 < 0)
                throw LayoutError("door " + d.name + " references unknown room");
            if (args[5] == "locked")
                d.locked_initially = true;
            else if (args[5] == "unlocked")
                d.locked_initially = false;
            else
                throw LayoutError("door state must be locked|unlocked");
            layout.doors.push_back(d);
        } else if (key == "key") {
            if (args.size() != 2)
                throw LayoutError("key expects: name room");
            int room = layout.find_room(args[1]);
            if (room < 0)
                throw LayoutError("key " + args[0] + " references unknown room");
            layout.keys.push_back({args[0], room});
        } else if (key == "ball") {
            if (args.size() != 1)
                throw LayoutError("ball expects: room");
            int room = layout.find_room(args[0]);
            if (room < 0)
                throw LayoutError("ball references unknown room");
            layout.ball_rooms.push_back(room);
        } else if (key == "start") {
            layout.start_room = layout.find_room(args.at(0));
            if (layout.start_room < 0)
                throw LayoutError("unknown start room " + args[0]);
        } else if (key == "goal") {
            layout.goal_room = layout.find_room(args.at(0));
            if (layout.goal_room < 0)
                throw LayoutError("unknown goal room " + args[0]);
        } else {
            throw LayoutError("unknown layout key " + key);
        }
    }

    if (!saw_family)
        throw LayoutError("layout missing family");
    if (layout.grid.empty())
        throw LayoutError("layout missing grid");
    layout.rows = (int)layout.grid.size();
    layout.cols = (int)layout.grid[0].size();
    for (const auto &row : layout.grid)
        if ((int)row.size() != layout.cols)
            throw LayoutError("ragged grid");
    if (layout.start_room < 0 || layout.goal_room < 0)
        throw LayoutError("layout missing start or goal room");
    if (layout.family == Family::Rooms &&
        (!layout.doors.empty() || !layout.keys.empty() || !layout.ball_rooms.empty()))
        throw LayoutError("rooms family takes no doors, keys or balls");

    layout.room_of_cell.assign((size_t)layout.rows * layout.cols, -1);
    layout.door_of_cell.assign((size_t)layout.rows * layout.cols, -1);

    for (size_t i = 0; i < layout.rooms.size(); ++i) {
        const Rect &r = layout.rooms[i].rect;
        if (r.top < 0 || r.left < 0 || r.bottom >= layout.rows ||
            r.right >= layout.cols || r.top > r.bottom || r.left > r.right)
            throw LayoutError("room " + layout.rooms[i].name + " out of bounds");
        for (int row = r.top; row <= r.bottom; ++row)
            for (int col = r.left; col <= r.right; ++col) {
                if (layout.grid[row][col] != '.')
                    continue;
                int c = layout.cell(row, col);
                if (layout.room_of_cell[c] >= 0)
                    throw LayoutError("cell in two rooms at " +
                                      std::to_string(row) + "," +
                                      std::to_string(col));
                layout.room_of_cell[c] = (int16_t)i;
            }
    }

    for (size_t i = 0; i < layout.doors.size(); ++i) {
        const DoorDef &d = layout.doors[i];
        if (d.row < 0 || d.row >= layout.rows || d.col < 0 || d.col >= layout.cols ||
            layout.grid[d.row][d.col] != 'D')
            throw LayoutError("door " + d.name + " not on a 'D' cell");
        int c = layout.cell(d.row, d.col);
        layout.door_of_cell[c] = (int16_t)i;
        layout.room_of_cell[c] = (int16_t)d.room1;
        // Every floor neighbour of a door belongs to one of its two rooms.
        const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            int nr = d.row + dr[k], nc = d.col + dc[k];
            if (nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols)
                continue;
            if (layout.grid[nr][nc] == 'D')
                throw LayoutError("adjacent door cells near " + d.name);
            if (layout.grid[nr][nc] != '.')
                continue;
            int room = layout.room_of_cell[layout.cell(nr, nc)];
            if (room != d.room1 && room != d.room2)
                throw LayoutError("door " + d.name +
                                  " touches a room it does not link");
        }
    }

    for (int row = 0; row < layout.rows; ++row)
        for (int col = 0; col < layout.cols; ++col) {
            char ch = layout.grid[row][col];
            int c = layout.cell(row, col);
            if (ch == '.' && layout.room_of_cell[c] < 0)
                throw LayoutError("floor cell outside every room at " +
                                  std::to_string(row) + "," + std::to_string(col));
            if (ch == 'D' && layout.door_of_cell[c] < 0)
                throw LayoutError("'D' cell without a door entry at " +
                                  std::to_string(row) + "," + std::to_string(col));
            if (ch != '.' && ch != '#' && ch != 'D')
                throw LayoutError(std::string("unknown grid character '") + ch +
                                  "'");
        }

    // With every door unlocked the walkable cells must form one region.
    {
        std::vector<uint8_t> seen(layout.room_of_cell.size(), 0);
        std::vector<int> stack;
        size_t walkable = 0;
        int first = -1;
        for (size_t c = 0; c < layout.room_of_cell.size(); ++c)
            if (layout.room_of_cell[c] >= 0) {
                ++walkable;
                if (first < 0)
                    first = (int)c;
            }
        if (first >= 0) {
            stack.push_back(first);
            seen[first] = 1;
            size_t reached = 0;
            const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
            while (!stack.empty()) {
                int c = stack.back();
                stack.pop_back();
                ++reached;
                int row = layout.row_of(c), col = layout.col_of(c);
                for (int k = 0; k < 4; ++k) {
                    int nr = row + dr[k], nc = col + dc[k];
                    if (nr < 0 || nr >= layout.rows || nc < 0 ||
                        nc >= layout.cols)
                        continue;
                    int n = layout.cell(nr, nc);
                    if (layout.room_of_cell[n] >= 0 && !seen[n]) {
                        seen[n] = 1;
                        stack.push_back(n);
                    }
                }
            }
            if (reached != walkable)
                throw LayoutError("layout is disconnected even with all doors "
                                  "unlocked");
        }
    }

    return layout;
}

// Region adjacencies of a rooms-family layout: every (corridor, room) pair
// whose cells touch orthogonally, in both directions, sorted.
inline std::vector<std::pair<std::string, std::string>>
region_adjacencies(const GridLayout &layout) {
    std::vector<std::pair<std::string, std::string>> pairs;
    const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
    for (int row = 0; row < layout.rows; ++row)
        for (int col = 0; col < layout.cols; ++col) {
            int a = layout.room_of_cell[layout.cell(row, col)];
            if (a < 0)
                continue;
            for (int k = 0; k < 4; ++k) {
                int nr = row + dr[k], nc = col + dc[k];
                if (nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols)
                    continue;
                int b = layout.room_of_cell[layout.cell(nr, nc)];
                if (b < 0 || b == a)
                    continue;
                pairs.emplace_back(layout.rooms[a].name, layout.rooms[b].name);
            }
        }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

// An auto-generated planning instance for a rooms-family layout and one
// (start, goal) pair, mirroring the shipped instances' shape.
inline std::string rooms_problem_text(const GridLayout &layout,
                                      const std::string &start_room,
                                      const std::string &goal_room,
                                      const std::string &name = "rooms-auto") {
    std::ostringstream os;
    os << "(define (problem " << name << ")\n";
    os << "    (:domain rooms)\n";
    os << "    (:objects\n       ";
    std::vector<std::string> names;
    for (const auto &room : layout.rooms)
        names.push_back(room.name);
    std::sort(names.begin(), names.end());
    for (const auto &n : names)
        os << " " << n;
    os << " - room\n    )\n";
    os << "    (:init\n";
    for (const auto &[a, b] : region_adjacencies(layout))
        os << "        (CONNECTED-ROOMS " << a << " " << b << ")\n";
    os << "        (in-room " << start_room << ")\n";
    os << "    )\n";
    os << "    (:goal (and\n        (in-room " << goal_room << "))\n    )\n";
    os << ")\n";
    return os.str();
}

} // namespace planrl
