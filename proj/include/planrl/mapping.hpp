#pragma once

#include "planrl/env.hpp"
#include "planrl/task.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace planrl {

struct MappingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/*
  The state mapping L: env states -> planning states, compiled against one
  (env, task) pair. Every task fact gets an evaluator over GridState, so
  single-fact queries run without materializing the whole image.
*/
class StateMapper {
public:
    StateMapper(const GridEnv &env, const PlanningTask &task)
        : env_(&env), task_(&task) {
        const GridLayout &lo = env.layout();
        compiled_.reserve(task.facts.size());
        for (const auto &fact : task.facts)
            compiled_.push_back(compile(fact, lo));
    }

    const PlanningTask &task() const { return *task_; }
    const GridEnv &env() const { return *env_; }

    bool holds(const GridState &s, FactId f) const {
        const Compiled &c = compiled_[f];
        switch (c.kind) {
        case Kind::AgentInRoom:
            return env_->room_of(s.agent_cell) == c.a;
        case Kind::KeyInRoom:
            return s.key_cells[c.a] >= 0 &&
                   env_->room_of(s.key_cells[c.a]) == c.b;
        case Kind::CarryKey:
            return s.carried_key == c.a;
        case Kind::EmptyHand:
            return s.carried_key < 0;
        case Kind::DoorLocked:
            return (s.locked_mask >> c.a & 1) != 0;
        case Kind::DoorUnlocked:
            return (s.locked_mask >> c.a & 1) == 0;
        }
        return false;
    }

    bool all_hold(const FactSet &facts, const GridState &s) const {
        for (FactId f : facts)
            if (!holds(s, f))
                return false;
        return true;
    }

    size_t count_missing(const FactSet &facts, const GridState &s) const {
        size_t missing = 0;
        for (FactId f : facts)
            missing += !holds(s, f);
        return missing;
    }

    // L(s) as an explicit fact set.
    FactSet to_facts(const GridState &s) const {
        std::vector<FactId> ids;
        ids.reserve(compiled_.size() / 2);
        for (FactId f = 0; f < (FactId)compiled_.size(); ++f)
            if (holds(s, f))
                ids.push_back(f);
        return FactSet(std::move(ids));
    }

    // The episode's abstract goal, resolved to task facts.
    FactSet abstract_goal() const {
        std::vector<FactId> ids;
        for (const auto &atom : env_->abstract_goal_atoms())
            ids.push_back(task_->require_fact(atom));
        return FactSet(std::move(ids));
    }

private:
    enum class Kind {
        AgentInRoom,
        KeyInRoom,
        CarryKey,
        EmptyHand,
        DoorLocked,
        DoorUnlocked,
    };
    struct Compiled {
        Kind kind;
        int a = -1;
        int b = -1;
    };

    Compiled compile(const Fact &fact, const GridLayout &lo) const {
        const pddl::Atom &atom = fact.atom;
        auto room_index = [&](const std::string &name) {
            int r = lo.find_room(name);
            if (r < 0)
                throw MappingError("fact " + atom.str() +
                                   " names a room missing from the layout");
            return r;
        };
        auto key_index = [&](const std::string &name) {
            for (size_t k = 0; k < lo.keys.size(); ++k)
                if (lo.keys[k].name == name)
                    return (int)k;
            throw MappingError("fact " + atom.str() +
                               " names a key missing from the layout");
        };
        auto door_index = [&](const std::string &name) {
            for (size_t d = 0; d < lo.doors.size(); ++d)
                if (lo.doors[d].name == name)
                    return (int)d;
            throw MappingError("fact " + atom.str() +
                               " names a door missing from the layout");
        };

        if (atom.predicate == "at-agent" || atom.predicate == "in-room")
            return {Kind::AgentInRoom, room_index(atom.args.at(0))};
        if (atom.predicate == "at")
            return {Kind::KeyInRoom, key_index(atom.args.at(0)),
                    room_index(atom.args.at(1))};
        if (atom.predicate == "carry")
            return {Kind::CarryKey, key_index(atom.args.at(0))};
        if (atom.predicate == "empty-hand")
            return {Kind::EmptyHand};
        if (atom.predicate == "locked")
            return {Kind::DoorLocked, door_index(atom.args.at(0))};
        if (atom.predicate == "unlocked")
            return {Kind::DoorUnlocked, door_index(atom.args.at(0))};
        throw MappingError("no mapping for predicate " + atom.predicate);
    }

    const GridEnv *env_;
    const PlanningTask *task_;
    std::vector<Compiled> compiled_;
};

} // namespace planrl
