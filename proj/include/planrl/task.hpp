#pragma once

#include "planrl/fact_set.hpp"
#include "planrl/pddl.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace planrl {

struct Fact {
    FactId id;
    pddl::Atom atom;

    std::string str() const { return atom.str(); }
};

/*
  A fully ground operator. Preconditions and effects are fact-id sets over
  the owning task's fact table; static facts have already been stripped.
  prevail = pre \ (add ∪ del): the preconditions the effect leaves alone.
*/
struct GroundOperator {
    std::string name; // trace form, e.g. "(pickup k-yellow-0 r-0-0)"
    FactSet pre;
    FactSet add;
    FactSet del;
    FactSet prevail;

    // add ∪ del; the facts this operator's effect touches.
    FactSet effect_facts() const { return set_union(add, del); }
};

using OperatorIndex = int32_t;

struct PlanningTask {
    std::vector<Fact> facts;
    std::vector<GroundOperator> operators;
    FactSet init;
    FactSet goal;
    bool goal_reachable_in_relaxation = true;
    std::vector<std::string> warnings; // non-fatal oddities found while grounding

    const Fact &fact(FactId id) const { return facts.at(static_cast<size_t>(id)); }

    std::optional<FactId> find_fact(const pddl::Atom &atom) const {
        auto it = atom_index_.find(atom.str());
        if (it == atom_index_.end())
            return std::nullopt;
        return it->second;
    }

    FactId require_fact(const pddl::Atom &atom) const {
        auto id = find_fact(atom);
        if (!id)
            throw std::runtime_error("unknown fact " + atom.str());
        return *id;
    }

    std::optional<OperatorIndex> find_operator(const std::string &name) const {
        auto it = operator_index_.find(name);
        if (it == operator_index_.end())
            return std::nullopt;
        return it->second;
    }

    void rebuild_indices() {
        atom_index_.clear();
        for (const auto &f : facts)
            atom_index_[f.atom.str()] = f.id;
        operator_index_.clear();
        for (size_t i = 0; i < operators.size(); ++i)
            operator_index_[operators[i].name] = static_cast<OperatorIndex>(i);
    }

    std::string fact_set_str(const FactSet &s) const {
        std::string out;
        for (FactId f : s) {
            if (!out.empty())
                out += " ";
            out += fact(f).str();
        }
        return out;
    }

private:
    std::unordered_map<std::string, FactId> atom_index_;
    std::unordered_map<std::string, OperatorIndex> operator_index_;
};

inline bool applicable(const FactSet &state, const GroundOperator &op) {
    return op.pre.is_subset_of(state);
}

struct InapplicableOperator : std::runtime_error {
    InapplicableOperator(const std::string &op_name, const std::string &missing)
        : std::runtime_error("operator " + op_name +
                             " not applicable; missing: " + missing) {}
};

inline FactSet apply(const FactSet &state, const GroundOperator &op) {
    return set_union(set_difference(state, op.del), op.add);
}

inline FactSet apply_checked(const PlanningTask &task, const FactSet &state,
                             const GroundOperator &op) {
    if (!applicable(state, op)) {
        FactSet missing = set_difference(op.pre, state);
        throw InapplicableOperator(op.name, task.fact_set_str(missing));
    }
    return apply(state, op);
}

/*
  Runs a plan from `state`. Returns the final state, or the index of the
  first step whose preconditions do not hold.
*/
struct PlanValidation {
    std::optional<FactSet> final_state;
    std::optional<size_t> failure_index;

    bool ok() const { return final_state.has_value(); }
};

inline PlanValidation validate_plan(const FactSet &state,
                                    const std::vector<const GroundOperator *> &plan) {
    FactSet current = state;
    for (size_t i = 0; i < plan.size(); ++i) {
        if (!applicable(current, *plan[i]))
            return {std::nullopt, i};
        current = apply(current, *plan[i]);
    }
    return {current, std::nullopt};
}

// Labeled transition system over enumerated states (planning or SMDP level).
struct TransitionGraph {
    struct Edge {
        int source;
        std::string label;
        int target;

        bool operator==(const Edge &) const = default;
    };

    std::vector<FactSet> states; // discovery order
    std::vector<Edge> edges;
    std::vector<int> goal_states;

    int find_state(const FactSet &s) const {
        auto it = index_.find(s);
        return it == index_.end() ? -1 : it->second;
    }

    int intern(const FactSet &s) {
        auto [it, inserted] = index_.emplace(s, (int)states.size());
        if (inserted)
            states.push_back(s);
        return it->second;
    }

private:
    std::unordered_map<FactSet, int, FactSetHash> index_;
};

struct StateCapExceeded : std::runtime_error {
    explicit StateCapExceeded(size_t count)
        : std::runtime_error("state cap exceeded after " +
                             std::to_string(count) + " states"),
          count(count) {}
    size_t count;
};

/*
  BFS over all operators from the initial state. Deterministic: states are
  numbered in discovery order, successors generated in operator order.
*/
inline TransitionGraph build_transition_graph(const PlanningTask &task,
                                              size_t state_cap = 1u << 20,
                                              std::optional<FactSet> start = {}) {
    if (state_cap == 0)
        throw std::invalid_argument("state_cap must be positive");
    TransitionGraph g;
    FactSet root = start.value_or(task.init);
    g.intern(root);
    for (size_t i = 0; i < g.states.size(); ++i) {
        FactSet state = g.states[i]; // copy: states vector may reallocate
        for (const auto &op : task.operators) {
            if (!applicable(state, op))
                continue;
            FactSet next = apply(state, op);
            if (g.states.size() >= state_cap && g.find_state(next) < 0)
                throw StateCapExceeded(g.states.size());
            int j = g.intern(next);
            g.edges.push_back({(int)i, op.name, j});
        }
    }
    for (size_t i = 0; i < g.states.size(); ++i)
        if (task.goal.is_subset_of(g.states[i]))
            g.goal_states.push_back((int)i);
    return g;
}

} // namespace planrl
