#pragma once

#include "planrl/task.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

namespace planrl {

enum class Heuristic { Blind, GoalCount, Additive };

inline Heuristic heuristic_from_name(const std::string &name) {
    if (name == "blind")
        return Heuristic::Blind;
    if (name == "goal-count")
        return Heuristic::GoalCount;
    if (name == "hadd")
        return Heuristic::Additive;
    throw std::invalid_argument("unknown heuristic " + name);
}

// |goal \ state|
inline int goal_count(const FactSet &state, const FactSet &goal) {
    return static_cast<int>(goal.count_missing_from(state));
}

inline constexpr int kInfinity = std::numeric_limits<int>::max() / 4;

/*
  Additive delete-relaxation cost of reaching `goal` from `state`:
  fact costs computed by the usual fixpoint, operator cost 1 each.
  Returns kInfinity when the goal is unreachable in the relaxation.
*/
inline int hadd(const FactSet &state, const PlanningTask &task,
                const FactSet &goal) {
    std::vector<int> cost(task.facts.size(), kInfinity);
    for (FactId f : state)
        cost[f] = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto &op : task.operators) {
            long pre_cost = 0;
            bool reachable = true;
            for (FactId f : op.pre) {
                if (cost[f] >= kInfinity) {
                    reachable = false;
                    break;
                }
                pre_cost += cost[f];
            }
            if (!reachable)
                continue;
            long new_cost = pre_cost + 1;
            for (FactId f : op.add) {
                if (new_cost < cost[f]) {
                    cost[f] = static_cast<int>(new_cost);
                    changed = true;
                }
            }
        }
    }
    long total = 0;
    for (FactId f : goal) {
        if (cost[f] >= kInfinity)
            return kInfinity;
        total += cost[f];
    }
    return static_cast<int>(std::min<long>(total, kInfinity));
}

struct Plan {
    std::vector<OperatorIndex> operators;
    int cost() const { return static_cast<int>(operators.size()); }
};

struct SearchResult {
    enum Status { Solved, Unsolvable, BudgetExceeded } status;
    std::optional<Plan> plan;
    size_t expansions = 0;

    bool solved() const { return status == Solved; }
};

struct SearchLimits {
    size_t max_expansions = 1'000'000;
};

/*
  A* over the grounded task. Tie-breaking on equal f: lower state hash
  first, then FIFO — fixed so the same inputs always return the same plan.
*/
inline SearchResult astar(const PlanningTask &task, const FactSet &start,
                          Heuristic heuristic = Heuristic::GoalCount,
                          std::optional<FactSet> goal_override = {},
                          SearchLimits limits = {}) {
    const FactSet goal = goal_override.value_or(task.goal);
    if (!goal_override && !task.goal_reachable_in_relaxation)
        return {SearchResult::Unsolvable, std::nullopt, 0};

    auto h = [&](const FactSet &s) -> int {
        switch (heuristic) {
        case Heuristic::Blind:
            return goal.is_subset_of(s) ? 0 : 1;
        case Heuristic::GoalCount:
            return goal_count(s, goal);
        case Heuristic::Additive:
            return hadd(s, task, goal);
        }
        return 0;
    };

    struct Node {
        int f;
        uint64_t state_hash;
        uint64_t seq;
        int state_index;

        bool operator>(const Node &other) const {
            if (f != other.f)
                return f > other.f;
            if (state_hash != other.state_hash)
                return state_hash > other.state_hash;
            return seq > other.seq;
        }
    };

    std::vector<FactSet> states;
    std::unordered_map<FactSet, int, FactSetHash> state_index;
    std::vector<int> g_cost;
    std::vector<int> parent;
    std::vector<OperatorIndex> reached_by;

    auto intern = [&](const FactSet &s) {
        auto [it, inserted] = state_index.emplace(s, (int)states.size());
        if (inserted) {
            states.push_back(s);
            g_cost.push_back(kInfinity);
            parent.push_back(-1);
            reached_by.push_back(-1);
        }
        return it->second;
    };

    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
    uint64_t seq = 0;

    int start_index = intern(start);
    g_cost[start_index] = 0;
    int h0 = h(start);
    if (h0 >= kInfinity)
        return {SearchResult::Unsolvable, std::nullopt, 0};
    open.push({h0, start.hash(), seq++, start_index});

    std::vector<bool> closed;
    size_t expansions = 0;
    while (!open.empty()) {
        Node node = open.top();
        open.pop();
        if (node.state_index < (int)closed.size() && closed[node.state_index])
            continue;
        if ((int)closed.size() <= node.state_index)
            closed.resize(node.state_index + 1, false);
        closed[node.state_index] = true;

        const FactSet state = states[node.state_index];
        if (goal.is_subset_of(state)) {
            Plan plan;
            int cur = node.state_index;
            while (parent[cur] >= 0) {
                plan.operators.push_back(reached_by[cur]);
                cur = parent[cur];
            }
            std::reverse(plan.operators.begin(), plan.operators.end());
            return {SearchResult::Solved, plan, expansions};
        }

        if (++expansions > limits.max_expansions)
            return {SearchResult::BudgetExceeded, std::nullopt, expansions};

        for (size_t oi = 0; oi < task.operators.size(); ++oi) {
            const auto &op = task.operators[oi];
            if (!applicable(state, op))
                continue;
            FactSet next = apply(state, op);
            int next_index = intern(next);
            int tentative = g_cost[node.state_index] + 1;
            if (tentative < g_cost[next_index]) {
                g_cost[next_index] = tentative;
                parent[next_index] = node.state_index;
                reached_by[next_index] = static_cast<OperatorIndex>(oi);
                int hn = h(next);
                if (hn >= kInfinity)
                    continue;
                if (next_index < (int)closed.size())
                    closed[next_index] = false;
                open.push({tentative + hn, next.hash(), seq++, next_index});
            }
        }
    }
    return {SearchResult::Unsolvable, std::nullopt, expansions};
}

} // namespace planrl
