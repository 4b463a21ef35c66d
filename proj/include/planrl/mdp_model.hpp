#pragma once

#include "planrl/annotation.hpp"
#include "planrl/env.hpp"
#include "planrl/mapping.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace planrl {

/*
  An explicit tabular MDP. Transition rows are per (state, action);
  discount(s,a) is the factor applied to the successor value in a backup —
  gamma for one-step models, gamma^k for option-level (semi-MDP) models
  whose actions take k base steps.
*/
struct MdpModel {
    struct Outcome {
        int target;
        double prob;
    };

    int num_states = 0;
    int num_actions = 0;
    int initial_state = 0;
    std::vector<uint8_t> goal;                     // absorbing
    std::vector<std::vector<Outcome>> transitions; // [s * num_actions + a]
    std::vector<double> reward;                    // [s * num_actions + a]
    std::vector<double> discount_exponent_steps;   // [s * num_actions + a], k in gamma^k
    std::vector<uint8_t> dead_end;                 // states with no usable action

    size_t row(int s, int a) const { return (size_t)s * num_actions + a; }

    void resize(int states, int actions) {
        num_states = states;
        num_actions = actions;
        goal.assign(states, 0);
        transitions.assign((size_t)states * actions, {});
        reward.assign((size_t)states * actions, 0.0);
        discount_exponent_steps.assign((size_t)states * actions, 1.0);
        dead_end.assign(states, 0);
    }
};

// An env unrolled into an explicit model plus the state table behind it.
struct EnumeratedMdp {
    MdpModel model;
    std::vector<GridState> states;
    std::unordered_map<uint64_t, int> index;

    int state_id(const GridState &s) const {
        GridState canonical = s;
        canonical.step_count = 0;
        auto it = index.find(canonical.encode());
        return it == index.end() ? -1 : it->second;
    }
};

inline EnumeratedMdp enumerate_mdp(const GridEnv &env, const GridState &reset_state,
                                   size_t cap = 4u << 20) {
    EnumeratedMdp out;
    out.states = env.enumerate_states(reset_state, cap);
    for (size_t i = 0; i < out.states.size(); ++i)
        out.index.emplace(out.states[i].encode(), (int)i);

    MdpModel &m = out.model;
    m.resize((int)out.states.size(), env.num_actions());
    m.initial_state = out.state_id(reset_state);
    for (size_t i = 0; i < out.states.size(); ++i) {
        const GridState &s = out.states[i];
        if (env.is_goal(s)) {
            m.goal[i] = 1;
            for (int a = 0; a < m.num_actions; ++a)
                m.transitions[m.row((int)i, a)] = {{(int)i, 1.0}};
            continue;
        }
        for (int a = 0; a < m.num_actions; ++a) {
            StepResult r = env.step(s, a);
            int t = out.state_id(r.state);
            if (t < 0)
                throw std::logic_error("successor outside enumeration");
            size_t row = m.row((int)i, a);
            m.transitions[row] = {{t, 1.0}};
            m.reward[row] = r.reward;
        }
    }
    return out;
}

/*
  The option's sub-MDP: every transition whose successor image drops a fact
  of `frame` is removed, remaining probabilities renormalized per (s,a)
  (trivial for deterministic rows), all-zero rows flagged as dead ends.
  Goal set = the option's termination states.
*/
inline MdpModel restrict_to_frame(const EnumeratedMdp &mdp,
                                  const AnnotatedTask &annotated,
                                  const OptionSpec &option,
                                  const GridState &entry,
                                  const FactSet &frame) {
    const StateMapper &mapper = annotated.mapper();
    if (!mapper.all_hold(frame, entry))
        throw std::invalid_argument("entry state violates the frame");
    int entry_id = mdp.state_id(entry);
    if (entry_id < 0)
        throw std::invalid_argument("entry state outside the enumeration");

    MdpModel m = mdp.model;
    m.initial_state = entry_id;
    for (int s = 0; s < m.num_states; ++s)
        m.goal[s] = annotated.termination(option, mdp.states[s]) ? 1 : 0;

    for (int s = 0; s < m.num_states; ++s) {
        if (m.goal[s])
            continue;
        bool any = false;
        for (int a = 0; a < m.num_actions; ++a) {
            auto &row = m.transitions[m.row(s, a)];
            double mass = 0;
            std::vector<MdpModel::Outcome> kept;
            for (const auto &o : row)
                if (mapper.all_hold(frame, mdp.states[o.target])) {
                    kept.push_back(o);
                    mass += o.prob;
                }
            if (mass > 0) {
                for (auto &o : kept)
                    o.prob /= mass;
                any = true;
            }
            row = std::move(kept);
        }
        if (!any)
            m.dead_end[s] = 1;
    }
    return m;
}

// States reachable from the model's initial state through surviving rows.
inline std::vector<int> reachable_states(const MdpModel &m) {
    std::vector<int> order;
    std::vector<uint8_t> seen(m.num_states, 0);
    order.push_back(m.initial_state);
    seen[m.initial_state] = 1;
    for (size_t i = 0; i < order.size(); ++i) {
        int s = order[i];
        if (m.goal[s])
            continue;
        for (int a = 0; a < m.num_actions; ++a)
            for (const auto &o : m.transitions[m.row(s, a)])
                if (!seen[o.target]) {
                    seen[o.target] = 1;
                    order.push_back(o.target);
                }
    }
    return order;
}

struct ValueIterationResult {
    std::vector<double> values;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

/*
  Sup-norm value iteration. Goal states are absorbing with value 0; action
  values use the model's per-row discount exponent: r + gamma^k * V(t).
*/
inline ValueIterationResult value_iteration(const MdpModel &m, double gamma,
                                            double tol = 1e-9,
                                            int max_iterations = 100000) {
    if (gamma < 0 || gamma >= 1)
        throw std::invalid_argument("gamma must be in [0,1)");
    ValueIterationResult out;
    out.values.assign(m.num_states, 0.0);
    std::vector<double> next(m.num_states, 0.0);
    for (out.iterations = 1; out.iterations <= max_iterations; ++out.iterations) {
        double residual = 0;
        for (int s = 0; s < m.num_states; ++s) {
            if (m.goal[s] || m.dead_end[s]) {
                next[s] = 0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            bool has_action = false;
            for (int a = 0; a < m.num_actions; ++a) {
                const auto &row = m.transitions[m.row(s, a)];
                if (row.empty())
                    continue;
                has_action = true;
                double v = m.reward[m.row(s, a)];
                double k = m.discount_exponent_steps[m.row(s, a)];
                double expect = 0;
                for (const auto &o : row)
                    expect += o.prob * out.values[o.target];
                v += std::pow(gamma, k) * expect;
                best = std::max(best, v);
            }
            next[s] = has_action ? best : 0.0;
            residual = std::max(residual, std::abs(next[s] - out.values[s]));
        }
        out.values.swap(next);
        out.residual = residual;
        if (residual < tol) {
            out.converged = true;
            return out;
        }
    }
    return out;
}

} // namespace planrl
