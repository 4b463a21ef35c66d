#pragma once

#include "planrl/annotation.hpp"
#include "planrl/mdp_model.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace planrl {

// Chooses the option's next primitive action during graph construction.
using OptionPolicyFn = std::function<int(int option_index, const GridState &)>;

/*
  Deterministic shortest-path option policies over an enumerated state
  space. Each option keeps to the actions its operator needs (movement for
  move options, movement plus the one manipulation action otherwise), so
  context facts are never disturbed. Distances to the option's termination
  set come from one backward BFS per option, lazily.

  These stand in for converged policies in the brute-force checks: they
  terminate whenever termination is reachable and preserve frames by
  construction.
*/
class ScriptedOptionPolicy {
public:
    ScriptedOptionPolicy(const AnnotatedTask &annotated, const EnumeratedMdp &mdp)
        : annotated_(&annotated), mdp_(&mdp) {
        const GridEnv &env = annotated.env();
        successors_.assign(mdp.states.size() * env.num_actions(), -1);
        predecessors_.resize(mdp.states.size());
        for (int s = 0; s < (int)mdp.states.size(); ++s) {
            if (env.is_goal(mdp.states[s]))
                continue;
            for (int a = 0; a < env.num_actions(); ++a) {
                GridState t = env.step(mdp.states[s], a).state;
                int ti = mdp.state_id(t);
                successors_[(size_t)s * env.num_actions() + a] = ti;
                if (ti != s)
                    predecessors_[ti].push_back({s, a});
            }
        }
        distance_.resize(annotated.options().size());
    }

    std::vector<int> allowed_actions(const OptionSpec &option) const {
        const GridEnv &env = annotated_->env();
        if (env.family() == Family::Rooms)
            return {RoomsAction::Up, RoomsAction::Down, RoomsAction::Left,
                    RoomsAction::Right};
        std::vector<int> actions = {MinigridAction::TurnLeft,
                                    MinigridAction::TurnRight,
                                    MinigridAction::Forward};
        if (!option.is_goal_option()) {
            const std::string &name = option.id;
            if (name.starts_with("(pickup"))
                actions.push_back(MinigridAction::Pickup);
            else if (name.starts_with("(drop"))
                actions.push_back(MinigridAction::Drop);
            else if (name.starts_with("(unlock") || name.starts_with("(lock"))
                actions.push_back(MinigridAction::Toggle);
        }
        return actions;
    }

    int operator()(int option_index, const GridState &state) const {
        const std::vector<int> &dist = distances(option_index);
        int s = mdp_->state_id(state);
        if (s < 0)
            return 0;
        int best_action = 0;
        int best = std::numeric_limits<int>::max();
        for (int a : allowed_actions(annotated_->option(option_index))) {
            int t = successors_[(size_t)s * annotated_->env().num_actions() + a];
            if (t < 0 || t == s)
                continue;
            if (dist[t] >= 0 && dist[t] < best) {
                best = dist[t];
                best_action = a;
            }
        }
        return best_action;
    }

    // -1 when the termination set is unreachable under the allowed actions.
    const std::vector<int> &distances(int option_index) const {
        std::vector<int> &dist = distance_[option_index];
        if (!dist.empty())
            return dist;
        const OptionSpec &option = annotated_->option(option_index);
        dist.assign(mdp_->states.size(), -1);
        std::vector<uint8_t> allowed(annotated_->env().num_actions(), 0);
        for (int a : allowed_actions(option))
            allowed[a] = 1;
        std::deque<int> frontier;
        for (int s = 0; s < (int)mdp_->states.size(); ++s)
            if (annotated_->termination(option, mdp_->states[s])) {
                dist[s] = 0;
                frontier.push_back(s);
            }
        while (!frontier.empty()) {
            int t = frontier.front();
            frontier.pop_front();
            for (const auto &[s, a] : predecessors_[t]) {
                if (!allowed[a] || dist[s] >= 0)
                    continue;
                if (annotated_->termination(option, mdp_->states[s]))
                    continue; // rollouts stop at the first termination state
                dist[s] = dist[t] + 1;
                frontier.push_back(s);
            }
        }
        return dist;
    }

private:
    const AnnotatedTask *annotated_;
    const EnumeratedMdp *mdp_;
    std::vector<int> successors_;
    std::vector<std::vector<std::pair<int, int>>> predecessors_;
    mutable std::vector<std::vector<int>> distance_;
};

struct SmdpBuildConfig {
    int step_cap = 4096;
    bool exhaustive = false; // branch over every action instead of a policy
    double gamma = 0.99;     // discount applied along rollouts
};

/*
  Builds the option-level transition system over an enumerated state space:
  for every state where an operator option can start (initiation holds,
  termination does not), roll the option out and record one labeled edge per
  reachable first-termination state.

  Deterministic policies give at most one edge per (state, option); rollouts
  that cycle, die in an env goal, or exceed the cap contribute nothing.
  Exhaustive mode branches over all actions (edge steps then carry the
  shortest execution; returns are meaningless and left at zero).
*/
inline SmdpGraph smdp_transition_graph(const AnnotatedTask &annotated,
                                       const EnumeratedMdp &mdp,
                                       const OptionPolicyFn &policy,
                                       SmdpBuildConfig cfg = {}) {
    const GridEnv &env = annotated.env();
    SmdpGraph graph;
    graph.states = mdp.states;

    for (int si = 0; si < (int)mdp.states.size(); ++si) {
        const GridState &s = mdp.states[si];
        if (env.is_goal(s))
            continue;
        for (int oi = 0; oi < (int)annotated.options().size(); ++oi) {
            const OptionSpec &option = annotated.option(oi);
            if (option.is_goal_option())
                continue;
            if (!annotated.initiation(option, s) ||
                annotated.termination(option, s))
                continue;

            if (cfg.exhaustive) {
                std::unordered_set<uint64_t> visited{s.encode()};
                std::unordered_set<uint64_t> reported;
                std::deque<std::pair<GridState, int>> frontier{{s, 0}};
                while (!frontier.empty()) {
                    auto [cur, depth] = frontier.front();
                    frontier.pop_front();
                    if (depth >= cfg.step_cap)
                        continue;
                    for (int a = 0; a < env.num_actions(); ++a) {
                        GridState next = env.step(cur, a).state;
                        next.step_count = 0;
                        if (annotated.termination(option, next)) {
                            if (reported.insert(next.encode()).second)
                                graph.edges.push_back({si, oi,
                                                       mdp.state_id(next),
                                                       depth + 1, 0.0, 1.0});
                            continue;
                        }
                        if (env.is_goal(next))
                            continue; // absorbing, option never terminates
                        if (visited.insert(next.encode()).second)
                            frontier.push_back({next, depth + 1});
                    }
                }
            } else {
                GridState cur = s;
                std::unordered_set<uint64_t> visited{cur.encode()};
                double return_sum = 0.0, discount = 1.0;
                const double gamma = cfg.gamma;
                for (int steps = 1; steps <= cfg.step_cap; ++steps) {
                    int a = policy(oi, cur);
                    StepResult r = env.step(cur, a);
                    cur = r.state;
                    cur.step_count = 0;
                    return_sum += discount * r.reward;
                    discount *= gamma;
                    if (annotated.termination(option, cur)) {
                        graph.edges.push_back({si, oi, mdp.state_id(cur), steps,
                                               return_sum, discount});
                        break;
                    }
                    if (env.is_goal(cur))
                        break; // interrupted by the episode end
                    if (!visited.insert(cur.encode()).second)
                        break; // deterministic policy cycled
                }
            }
        }
    }
    return graph;
}

struct BisimWitness {
    SmdpGraph::Edge edge;
    std::string reason;
};

struct BisimReport {
    bool holds = true;
    std::optional<BisimWitness> witness;
    // The relation {(s,t) | L(s) = L(t)}, kept as its partition into
    // abstract-state classes.
    std::unordered_map<FactSet, std::vector<int>, FactSetHash> relation_classes;
    size_t edges_checked = 0;
};

/*
  The executable reading of the bisimilarity claim, using the kernel
  relation of L:

    (1) projection: every option edge (s, o, t) maps onto a planning edge —
        o applicable at L(s), L(t) = L(s) after applying o, and L(s) appears
        in the planning transition graph;
    (2) kernel consistency: L-equal sources traversed by the same operator
        land in L-equal targets (the relation transfers moves).

  Frame preservation implies both; a policy that perturbs context facts
  mid-option breaks (1) at the offending edge.
*/
inline BisimReport check_bisimulation(const TransitionGraph &planning_graph,
                                      const SmdpGraph &smdp,
                                      const AnnotatedTask &annotated) {
    const StateMapper &mapper = annotated.mapper();
    const PlanningTask &task = annotated.task();

    BisimReport report;
    std::vector<FactSet> images;
    images.reserve(smdp.states.size());
    for (int i = 0; i < (int)smdp.states.size(); ++i) {
        images.push_back(mapper.to_facts(smdp.states[i]));
        report.relation_classes[images.back()].push_back(i);
    }

    std::unordered_map<uint64_t, FactSet> projected; // (L(s),o) -> L(t)
    auto pair_key = [](const FactSet &image, int option) {
        return image.hash() * 1000003ULL + (uint64_t)option;
    };

    for (const auto &edge : smdp.edges) {
        ++report.edges_checked;
        const OptionSpec &option = annotated.option(edge.option);
        const GroundOperator &op = task.operators[option.op];
        const FactSet &src = images[edge.source];
        const FactSet &dst = images[edge.target];

        if (planning_graph.find_state(src) < 0) {
            report.holds = false;
            report.witness = {edge, "abstract source state missing from the "
                                    "planning transition graph"};
            return report;
        }
        if (!applicable(src, op)) {
            report.holds = false;
            report.witness = {edge, "operator " + op.name +
                                        " not applicable at the abstract source"};
            return report;
        }
        if (apply(src, op) != dst) {
            report.holds = false;
            report.witness = {edge, "abstract target differs from applying " +
                                        op.name};
            return report;
        }
        auto [it, inserted] = projected.emplace(pair_key(src, edge.option), dst);
        if (!inserted && it->second != dst) {
            report.holds = false;
            report.witness = {edge,
                              "L-equal sources reach L-different targets under " +
                                  op.name};
            return report;
        }
    }
    return report;
}

/*
  Nested partial frames induce nested restricted state spaces: everything
  reachable under the larger frame stays reachable under the smaller one.
*/
struct FrameMonotonicityReport {
    bool holds = true;
    size_t reachable_small_frame = 0;
    size_t reachable_large_frame = 0;
};

inline FrameMonotonicityReport
check_frame_monotonicity(const EnumeratedMdp &mdp, const AnnotatedTask &annotated,
                         const OptionSpec &option, const GridState &entry,
                         const FactSet &frame_p, const FactSet &frame_q) {
    FrameSnapshot full = annotated.context_and_frame(option, entry);
    if (!frame_p.is_subset_of(frame_q) || !frame_q.is_subset_of(full.frame))
        throw std::invalid_argument("expected frame_p subset of frame_q subset of the full frame");

    MdpModel small = restrict_to_frame(mdp, annotated, option, entry, frame_p);
    MdpModel large = restrict_to_frame(mdp, annotated, option, entry, frame_q);
    std::vector<int> reach_small = reachable_states(small);
    std::vector<int> reach_large = reachable_states(large);

    FrameMonotonicityReport report;
    report.reachable_small_frame = reach_small.size();
    report.reachable_large_frame = reach_large.size();
    std::vector<uint8_t> in_small(mdp.states.size(), 0);
    for (int s : reach_small)
        in_small[s] = 1;
    for (int s : reach_large)
        if (!in_small[s]) {
            report.holds = false;
            return report;
        }
    return report;
}

/*
  Option-level model for semi-MDP value iteration, from a greedy-policy
  graph: acting with option o from s costs its rollout return and lands on
  the recorded termination state with discount gamma^steps. The goal option
  is appended as one extra action using its own rollouts.
*/
inline MdpModel build_smdp_model(const AnnotatedTask &annotated,
                                 const EnumeratedMdp &mdp,
                                 const SmdpGraph &graph,
                                 const OptionPolicyFn &policy,
                                 int step_cap = 4096, double gamma = 0.99) {
    const GridEnv &env = annotated.env();
    int num_options = (int)annotated.options().size();
    MdpModel m;
    m.resize((int)mdp.states.size(), num_options);
    m.initial_state = mdp.model.initial_state;
    for (int s = 0; s < (int)mdp.states.size(); ++s)
        m.goal[s] = mdp.model.goal[s];

    for (const auto &edge : graph.edges) {
        size_t row = m.row(edge.source, edge.option);
        m.transitions[row] = {{edge.target, 1.0}};
        m.reward[row] = edge.return_sum;
        m.discount_exponent_steps[row] = edge.steps;
    }

    // Goal-option rollouts (the graph holds operator options only).
    int goal_index = num_options - 1;
    const OptionSpec &goal_option = annotated.goal_option();
    for (int s = 0; s < (int)mdp.states.size(); ++s) {
        const GridState &state = mdp.states[s];
        if (env.is_goal(state) || !annotated.initiation(goal_option, state))
            continue;
        GridState cur = state;
        std::unordered_set<uint64_t> visited{cur.encode()};
        double return_sum = 0.0, discount = 1.0;
        for (int steps = 1; steps <= step_cap; ++steps) {
            StepResult r = env.step(cur, policy(goal_index, cur));
            cur = r.state;
            cur.step_count = 0;
            return_sum += discount * r.reward;
            discount *= gamma;
            if (annotated.termination(goal_option, cur)) {
                size_t row = m.row(s, goal_index);
                m.transitions[row] = {{mdp.state_id(cur), 1.0}};
                m.reward[row] = return_sum;
                m.discount_exponent_steps[row] = steps;
                break;
            }
            if (!visited.insert(cur.encode()).second)
                break;
        }
    }
    return m;
}

} // namespace planrl
