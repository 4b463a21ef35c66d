#pragma once

#include "planrl/layout.hpp"
#include "planrl/pddl.hpp"
#include "planrl/rng.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace planrl {

enum class RewardMode { MinigridSparse, StepCost };

enum class SeedPolicy {
    RandomizeCells,         // rooms fixed by the manifest, cells drawn per seed
    RandomizeRoomsAndCells, // start/goal rooms drawn per seed as well
};

// Test fixtures; PhaseLockedDoors lets the agent walk through locked doors,
// which breaks the abstraction on purpose.
enum class EnvMutation { None, PhaseLockedDoors };

struct EnvSpec {
    GridLayout layout;
    RewardMode reward_mode = RewardMode::MinigridSparse;
    int horizon = 1024;
    SeedPolicy seed_policy = SeedPolicy::RandomizeCells;
    EnvMutation mutation = EnvMutation::None;
    // The shipped sparse reward is the MiniGrid convention
    // 1 - 0.9 * steps/horizon; this switches to the literal 1 - 0.9/steps.
    bool literal_sparse_formula = false;
};

// Actions. Minigrid family uses all six; the rooms family moves in the four
// grid directions (Left..Toggle unused).
struct MinigridAction {
    enum { TurnLeft = 0, TurnRight, Forward, Pickup, Drop, Toggle, Count };
};
struct RoomsAction {
    enum { Up = 0, Down, Left, Right, Count };
};

constexpr int kMaxKeys = 2;

struct GridState {
    uint16_t agent_cell = 0;
    uint8_t agent_dir = 0; // 0=east,1=south,2=west,3=north (minigrid family)
    int8_t carried_key = -1;
    std::array<int16_t, kMaxKeys> key_cells{-1, -1}; // -1 while carried/absent
    uint16_t locked_mask = 0;
    uint16_t step_count = 0; // excluded from identity

    bool operator==(const GridState &other) const {
        return encode() == other.encode();
    }

    // Identity excludes step_count (the MDP is stationary); ball cells are
    // frozen per episode and live in the env.
    uint64_t encode() const {
        uint64_t code = agent_cell;
        code = code << 2 | agent_dir;
        code = code << 3 | (uint64_t)(carried_key + 1);
        for (int16_t kc : key_cells)
            code = code << 11 | (uint64_t)(kc + 1);
        code = code << 12 | locked_mask;
        return code;
    }
};

struct StepResult {
    GridState state;
    double reward = 0.0;
    bool done = false;
};

struct EnvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/*
  A deterministic, fully enumerable gridworld. An instance binds a spec to
  one episode context (seed): goal cell and ball cells are drawn at reset
  and then frozen, so step() is a pure function of (state, action).
*/
class GridEnv {
public:
    explicit GridEnv(EnvSpec spec) : spec_(std::move(spec)) {
        if (spec_.layout.keys.size() > kMaxKeys)
            throw EnvError("too many keys in layout");
        if (spec_.layout.doors.size() > 12)
            throw EnvError("too many doors in layout");
    }

    const EnvSpec &spec() const { return spec_; }
    const GridLayout &layout() const { return spec_.layout; }
    int num_actions() const {
        return family() == Family::Minigrid ? (int)MinigridAction::Count
                                            : (int)RoomsAction::Count;
    }
    Family family() const { return spec_.layout.family; }
    int horizon() const { return spec_.horizon; }
    int goal_cell() const { return goal_cell_; }
    int start_room() const { return start_room_; }
    int goal_room() const { return goal_room_; }
    const std::vector<uint16_t> &ball_cells() const { return ball_cells_; }

    GridState reset(uint32_t seed) {
        const GridLayout &lo = spec_.layout;
        Rng rng(seed);

        start_room_ = lo.start_room;
        goal_room_ = lo.goal_room;
        if (spec_.seed_policy == SeedPolicy::RandomizeRoomsAndCells) {
            std::vector<int> proper;
            for (size_t i = 0; i < lo.rooms.size(); ++i)
                if (!lo.rooms[i].is_corridor())
                    proper.push_back((int)i);
            if (proper.size() < 2)
                throw EnvError("need two proper rooms to randomize");
            start_room_ = proper[rng.below((int)proper.size())];
            do {
                goal_room_ = proper[rng.below((int)proper.size())];
            } while (goal_room_ == start_room_);
        }

        GridState s;
        std::unordered_set<int> taken;
        auto draw_cell = [&](int room, bool allow_agent_overlap = false) {
            auto cells = lo.room_cells(room);
            std::erase_if(cells, [&](int c) { return taken.count(c) > 0; });
            if (cells.empty() && allow_agent_overlap) {
                // Degenerate rooms: the goal may share the agent's cell.
                cells = lo.room_cells(room);
                std::erase_if(cells, [&](int c) {
                    return taken.count(c) > 0 && c != (int)s.agent_cell;
                });
            }
            if (cells.empty())
                throw EnvError("no free cell in room " + lo.rooms[room].name);
            int c = cells[rng.below((int)cells.size())];
            taken.insert(c);
            return c;
        };

        s.agent_cell = (uint16_t)draw_cell(start_room_);
        s.agent_dir = (uint8_t)rng.below(4);
        for (size_t k = 0; k < lo.keys.size(); ++k)
            s.key_cells[k] = (int16_t)draw_cell(lo.keys[k].spawn_room);
        goal_cell_ = draw_cell(goal_room_, true);
        for (size_t d = 0; d < lo.doors.size(); ++d)
            if (lo.doors[d].locked_initially)
                s.locked_mask |= (uint16_t)(1u << d);

        ball_cells_.clear();
        for (int room : lo.ball_rooms) {
            auto cells = lo.room_cells(room);
            std::erase_if(cells, [&](int c) {
                if (taken.count(c))
                    return true;
                // keep door fronts clear so balls never seal a passage
                int row = lo.row_of(c), col = lo.col_of(c);
                const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int nr = row + dr[k], nc = col + dc[k];
                    if (nr >= 0 && nr < lo.rows && nc >= 0 && nc < lo.cols &&
                        lo.grid[nr][nc] == 'D')
                        return true;
                }
                return false;
            });
            if (cells.empty())
                throw EnvError("no free cell for ball in " + lo.rooms[room].name);
            int c = cells[rng.below((int)cells.size())];
            taken.insert(c);
            ball_cells_.push_back((uint16_t)c);
        }
        return s;
    }

    bool is_goal(const GridState &s) const {
        return (int)s.agent_cell == goal_cell_;
    }

    bool is_terminal(const GridState &s) const {
        return is_goal(s) || s.step_count >= spec_.horizon;
    }

    StepResult step(const GridState &state, int action) const {
        GridState s = state;
        if (family() == Family::Minigrid)
            apply_minigrid_action(s, action);
        else
            apply_rooms_action(s, action);
        ++s.step_count;

        StepResult result;
        bool at_goal = (int)s.agent_cell == goal_cell_;
        result.done = at_goal || s.step_count >= spec_.horizon;
        result.reward = reward_for(s, at_goal);
        result.state = s;
        return result;
    }

    double reward_for(const GridState &s, bool at_goal) const {
        switch (spec_.reward_mode) {
        case RewardMode::MinigridSparse:
            if (!at_goal)
                return 0.0;
            if (spec_.literal_sparse_formula)
                return 1.0 - 0.9 / std::max<int>(1, s.step_count);
            return 1.0 - 0.9 * (double)s.step_count / spec_.horizon;
        case RewardMode::StepCost:
            return at_goal ? 0.95 : -0.05;
        }
        return 0.0;
    }

    // Room of the agent's cell; door cells resolve to the door's first room.
    int room_of(int cell) const {
        int room = spec_.layout.room_of_cell[cell];
        if (room < 0)
            throw EnvError("agent on an unmapped cell " + std::to_string(cell));
        return room;
    }

    // The planning-level image of a state (Minigrid family: room, key and
    // door facts; rooms family: the region). Balls are invisible.
    std::vector<pddl::Atom> symbolic_state(const GridState &s) const {
        const GridLayout &lo = spec_.layout;
        std::vector<pddl::Atom> atoms;
        const std::string &room = lo.rooms[room_of(s.agent_cell)].name;
        if (family() == Family::Rooms) {
            atoms.push_back({"in-room", {room}});
            return atoms;
        }
        atoms.push_back({"at-agent", {room}});
        for (size_t k = 0; k < lo.keys.size(); ++k) {
            if ((int)k == s.carried_key)
                atoms.push_back({"carry", {lo.keys[k].name}});
            else
                atoms.push_back(
                    {"at", {lo.keys[k].name, lo.rooms[room_of(s.key_cells[k])].name}});
        }
        if (s.carried_key < 0)
            atoms.push_back({"empty-hand", {}});
        for (size_t d = 0; d < lo.doors.size(); ++d)
            atoms.push_back({s.locked_mask >> d & 1 ? "locked" : "unlocked",
                             {lo.doors[d].name}});
        return atoms;
    }

    std::vector<pddl::Atom> abstract_goal_atoms() const {
        const std::string &room = spec_.layout.rooms[goal_room_].name;
        if (family() == Family::Rooms)
            return {{"in-room", {room}}};
        return {{"at-agent", {room}}};
    }

    // All states reachable from `start` (step_count ignored), BFS order.
    std::vector<GridState> enumerate_states(const GridState &start,
                                            size_t cap = 4u << 20) const {
        std::vector<GridState> states;
        std::unordered_set<uint64_t> seen;
        std::deque<GridState> queue;
        GridState root = start;
        root.step_count = 0;
        seen.insert(root.encode());
        states.push_back(root);
        if (!is_goal(root))
            queue.push_back(root);
        while (!queue.empty()) {
            GridState s = queue.front();
            queue.pop_front();
            for (int a = 0; a < num_actions(); ++a) {
                GridState t = step(s, a).state;
                t.step_count = 0;
                if (!seen.insert(t.encode()).second)
                    continue;
                if (states.size() >= cap)
                    throw EnvError("state enumeration cap exceeded");
                states.push_back(t);
                if (!is_goal(t)) // goal states are absorbing
                    queue.push_back(t);
            }
        }
        return states;
    }

private:
    void apply_rooms_action(GridState &s, int action) const {
        const GridLayout &lo = spec_.layout;
        const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        if (action < 0 || action >= RoomsAction::Count)
            return; // unknown actions are no-ops
        int row = lo.row_of(s.agent_cell) + dr[action];
        int col = lo.col_of(s.agent_cell) + dc[action];
        if (row < 0 || row >= lo.rows || col < 0 || col >= lo.cols)
            return;
        if (lo.grid[row][col] == '#')
            return;
        s.agent_cell = (uint16_t)lo.cell(row, col);
    }

    std::optional<int> facing_cell(const GridState &s) const {
        const GridLayout &lo = spec_.layout;
        const int dr[] = {0, 1, 0, -1}, dc[] = {1, 0, -1, 0};
        int row = lo.row_of(s.agent_cell) + dr[s.agent_dir];
        int col = lo.col_of(s.agent_cell) + dc[s.agent_dir];
        if (row < 0 || row >= lo.rows || col < 0 || col >= lo.cols)
            return std::nullopt;
        return lo.cell(row, col);
    }

    bool cell_occupied(const GridState &s, int cell) const {
        for (int16_t kc : s.key_cells)
            if (kc == cell)
                return true;
        for (uint16_t b : ball_cells_)
            if ((int)b == cell)
                return true;
        return false;
    }

    void apply_minigrid_action(GridState &s, int action) const {
        const GridLayout &lo = spec_.layout;
        switch (action) {
        case MinigridAction::TurnLeft:
            s.agent_dir = (uint8_t)((s.agent_dir + 3) % 4);
            break;
        case MinigridAction::TurnRight:
            s.agent_dir = (uint8_t)((s.agent_dir + 1) % 4);
            break;
        case MinigridAction::Forward: {
            auto target = facing_cell(s);
            if (!target || lo.is_wall(*target) || cell_occupied(s, *target))
                break;
            int door = lo.door_of_cell[*target];
            if (door >= 0 && (s.locked_mask >> door & 1) &&
                spec_.mutation != EnvMutation::PhaseLockedDoors)
                break;
            s.agent_cell = (uint16_t)*target;
            break;
        }
        case MinigridAction::Pickup: {
            auto target = facing_cell(s);
            if (!target || s.carried_key >= 0)
                break;
            for (size_t k = 0; k < lo.keys.size(); ++k) {
                if (s.key_cells[k] != (int16_t)*target)
                    continue;
                // only within the agent's own room, so the planning-level
                // pickup operator covers the transition
                if (lo.room_of_cell[*target] != room_of(s.agent_cell))
                    break;
                s.carried_key = (int8_t)k;
                s.key_cells[k] = -1;
                break;
            }
            break;
        }
        case MinigridAction::Drop: {
            auto target = facing_cell(s);
            if (!target || s.carried_key < 0)
                break;
            if (lo.grid[lo.row_of(*target)][lo.col_of(*target)] != '.')
                break;
            if (cell_occupied(s, *target) || *target == goal_cell_ ||
                *target == (int)s.agent_cell)
                break;
            if (lo.room_of_cell[*target] != room_of(s.agent_cell))
                break;
            s.key_cells[s.carried_key] = (int16_t)*target;
            s.carried_key = -1;
            break;
        }
        case MinigridAction::Toggle: {
            auto target = facing_cell(s);
            if (!target || s.carried_key < 0)
                break;
            int door = lo.door_of_cell[*target];
            // all shipped keys match all doors; locked doors cannot be
            // re-locked, which keeps the reachable space small
            if (door >= 0 && (s.locked_mask >> door & 1))
                s.locked_mask &= (uint16_t)~(1u << door);
            break;
        }
        default:
            break; // unknown actions are no-ops
        }
    }

    EnvSpec spec_;
    int goal_cell_ = -1;
    int start_room_ = -1;
    int goal_room_ = -1;
    std::vector<uint16_t> ball_cells_;
};

} // namespace planrl
