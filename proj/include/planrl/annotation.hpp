#pragma once

#include "planrl/env.hpp"
#include "planrl/mapping.hpp"
#include "planrl/task.hpp"

#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace planrl {

/*
  Options derived from the grounded operators: one option per operator
  (initiation = precondition holds under L, termination = prevail plus add
  effects hold), plus a single goal option (initiation = abstract goal
  satisfied, termination = the env's goal states).
*/
struct OptionSpec {
    enum class Kind { Operator, Goal };

    Kind kind = Kind::Goal;
    std::string id; // operator name, or "GOAL"
    OperatorIndex op = -1;

    bool is_goal_option() const { return kind == Kind::Goal; }
};

inline std::vector<OptionSpec> derive_options(const PlanningTask &task) {
    std::vector<OptionSpec> options;
    options.reserve(task.operators.size() + 1);
    for (size_t i = 0; i < task.operators.size(); ++i)
        options.push_back({OptionSpec::Kind::Operator, task.operators[i].name,
                           (OperatorIndex)i});
    options.push_back({OptionSpec::Kind::Goal, "GOAL", -1});
    return options;
}

struct IntrinsicRewardConfig {
    double frame_violation_penalty = -1.0; // per violated frame fact, per step
    double step_penalty = -0.9 / 1024;     // per non-terminal step
    double termination_bonus = 1.0;        // on entering the termination set
};

// Captured when an operator option starts: the facts that should persist
// while it runs. context = L(s) \ (pre ∪ add ∪ del), frame = prevail ∪ context.
struct FrameSnapshot {
    uint64_t entry_key = 0;
    FactSet context;
    FactSet frame;
    IntrinsicRewardConfig rewards;
};

struct PropernessWitness {
    GridState source;
    int action;
    GridState target;
    std::string detail;
};

struct ProperReport {
    bool proper = true;
    std::optional<PropernessWitness> witness;
    size_t states_checked = 0;
    size_t transitions_checked = 0;
};

class AnnotatedTask {
public:
    AnnotatedTask(const GridEnv &env, const PlanningTask &task)
        : env_(&env), task_(&task), mapper_(env, task),
          options_(derive_options(task)) {}

    const GridEnv &env() const { return *env_; }
    const PlanningTask &task() const { return *task_; }
    const StateMapper &mapper() const { return mapper_; }
    const std::vector<OptionSpec> &options() const { return options_; }

    const OptionSpec &option(size_t index) const { return options_[index]; }
    const OptionSpec &goal_option() const { return options_.back(); }

    int find_option(const std::string &id) const {
        for (size_t i = 0; i < options_.size(); ++i)
            if (options_[i].id == id)
                return (int)i;
        return -1;
    }

    bool initiation(const OptionSpec &o, const GridState &s) const {
        if (o.is_goal_option())
            return mapper_.all_hold(mapper_.abstract_goal(), s);
        return mapper_.all_hold(task_->operators[o.op].pre, s);
    }

    bool termination(const OptionSpec &o, const GridState &s) const {
        if (o.is_goal_option())
            return env_->is_goal(s);
        const GroundOperator &op = task_->operators[o.op];
        return mapper_.all_hold(op.prevail, s) && mapper_.all_hold(op.add, s);
    }

    FrameSnapshot context_and_frame(const OptionSpec &o, const GridState &s,
                                    IntrinsicRewardConfig rewards = {}) const {
        if (o.is_goal_option())
            throw std::logic_error("the goal option has no frame");
        const GroundOperator &op = task_->operators[o.op];
        FrameSnapshot snap;
        snap.entry_key = s.encode();
        snap.context = set_difference(
            set_difference(mapper_.to_facts(s), op.pre), op.effect_facts());
        snap.frame = set_union(op.prevail, snap.context);
        snap.rewards = rewards;
        return snap;
    }

    /*
      The per-step option reward: a penalty per frame fact currently false,
      plus a step penalty while unterminated, plus a bonus at termination.
      The goal option carries no frame, so only the last two terms apply.
    */
    double intrinsic_reward(const FrameSnapshot &snap, const OptionSpec &o,
                            const GridState &s) const {
        const IntrinsicRewardConfig &c = snap.rewards;
        double r = c.frame_violation_penalty *
                   (double)mapper_.count_missing(snap.frame, s);
        if (termination(o, s))
            r += c.termination_bonus;
        else
            r += c.step_penalty;
        return r;
    }

    FrameSnapshot goal_snapshot(const GridState &s,
                                IntrinsicRewardConfig rewards = {}) const {
        FrameSnapshot snap;
        snap.entry_key = s.encode();
        snap.rewards = rewards;
        return snap;
    }

    /*
      Checks that the planning task abstracts the env: under L, every env
      transition is either an abstract self-loop or covered by an operator
      edge. Also re-checks the construction-time consistency conditions
      (initial-state image, goal-state consistency).
    */
    ProperReport is_proper(const GridState &reset_state,
                           bool check_initial_image = true,
                           size_t cap = 4u << 20) const {
        ProperReport report;
        if (check_initial_image && mapper_.to_facts(reset_state) != task_->init) {
            report.proper = false;
            report.witness = {reset_state, -1, reset_state,
                              "L(s0) differs from the planning initial state"};
            return report;
        }
        FactSet abstract_goal = mapper_.abstract_goal();
        std::vector<GridState> states = env_->enumerate_states(reset_state, cap);
        report.states_checked = states.size();
        for (const GridState &s : states) {
            if (env_->is_goal(s)) {
                if (!mapper_.all_hold(abstract_goal, s)) {
                    report.proper = false;
                    report.witness = {s, -1, s,
                                      "goal state inconsistent with the abstract goal"};
                    return report;
                }
                continue; // absorbing
            }
            FactSet image = mapper_.to_facts(s);
            for (int a = 0; a < env_->num_actions(); ++a) {
                GridState t = env_->step(s, a).state;
                ++report.transitions_checked;
                FactSet target_image = mapper_.to_facts(t);
                if (image == target_image)
                    continue;
                bool covered = false;
                for (const auto &op : task_->operators) {
                    if (applicable(image, op) && apply(image, op) == target_image) {
                        covered = true;
                        break;
                    }
                }
                if (!covered) {
                    std::ostringstream detail;
                    detail << "no operator maps " << task_->fact_set_str(image)
                           << " to " << task_->fact_set_str(target_image);
                    report.proper = false;
                    report.witness = {s, a, t, detail.str()};
                    return report;
                }
            }
        }
        return report;
    }

private:
    const GridEnv *env_;
    const PlanningTask *task_;
    StateMapper mapper_;
    std::vector<OptionSpec> options_;
};

// Option-level transition system: states are env states (aligned with the
// enumeration that produced it), one edge per (initiation state, option,
// first termination state reached).
struct SmdpGraph {
    struct Edge {
        int source;      // index into states
        int option;      // index into the annotated task's options
        int target;      // index into states
        int steps;       // rollout length
        double return_sum;       // discounted env reward along the rollout
        double discount_factor;  // gamma^steps
    };

    std::vector<GridState> states;
    std::vector<Edge> edges;
};

struct FramePreservationWitness {
    SmdpGraph::Edge edge;
    FactSet source_frame;
    FactSet target_frame;
};

struct FramePreservationReport {
    bool preserved = true;
    std::optional<FramePreservationWitness> witness;
    size_t edges_checked = 0;
};

// Frame preservation: along every option edge the frame computed at the
// source equals the frame computed at the target.
inline FramePreservationReport
is_frame_preserving(const AnnotatedTask &annotated, const SmdpGraph &graph) {
    FramePreservationReport report;
    for (const auto &edge : graph.edges) {
        const OptionSpec &option = annotated.option(edge.option);
        if (option.is_goal_option())
            continue; // no frame
        ++report.edges_checked;
        FrameSnapshot src =
            annotated.context_and_frame(option, graph.states[edge.source]);
        FrameSnapshot dst =
            annotated.context_and_frame(option, graph.states[edge.target]);
        if (src.frame != dst.frame) {
            report.preserved = false;
            report.witness = {edge, src.frame, dst.frame};
            return report;
        }
    }
    return report;
}

} // namespace planrl
