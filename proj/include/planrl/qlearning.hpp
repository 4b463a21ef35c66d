#pragma once

#include "planrl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace planrl {

struct EpsilonSchedule {
    double initial = 1.0;
    double final_value = 0.05;
    double decay_fraction = 0.5; // fraction of the run spent decaying

    double at(double progress) const {
        if (decay_fraction <= 0 || progress >= decay_fraction)
            return final_value;
        double t = progress / decay_fraction;
        return initial + (final_value - initial) * t;
    }
};

struct LearnerConfig {
    double alpha = 0.1;
    double gamma = 0.99;
    EpsilonSchedule epsilon;
    double default_value = 0.0;

    void validate() const {
        if (alpha <= 0 || alpha > 1)
            throw std::invalid_argument("alpha must be in (0,1]");
        if (gamma <= 0 || gamma >= 1)
            throw std::invalid_argument("gamma must be in (0,1)");
        if (epsilon.initial < 0 || epsilon.initial > 1 ||
            epsilon.final_value < 0 || epsilon.final_value > 1)
            throw std::invalid_argument("epsilon bounds must be in [0,1]");
    }
};

using StateKey = uint64_t;

/*
  A tabular action-value function. Rows materialize on first touch and
  absent entries read as default_value.
*/
class QTable {
public:
    QTable(int num_actions, double default_value = 0.0)
        : num_actions_(num_actions), default_value_(default_value) {}

    int num_actions() const { return num_actions_; }
    size_t num_states() const { return rows_.size(); }

    double value(StateKey s, int a) const {
        auto it = rows_.find(s);
        return it == rows_.end() ? default_value_ : it->second.q[a];
    }

    double max_value(StateKey s) const {
        auto it = rows_.find(s);
        if (it == rows_.end())
            return default_value_;
        return *std::max_element(it->second.q.begin(), it->second.q.end());
    }

    int greedy_action(StateKey s) const {
        auto it = rows_.find(s);
        if (it == rows_.end())
            return 0; // all-equal row: lowest id wins
        const auto &q = it->second.q;
        return (int)(std::max_element(q.begin(), q.end()) - q.begin());
    }

    int visits(StateKey s) const {
        auto it = rows_.find(s);
        return it == rows_.end() ? 0 : it->second.visits;
    }

    void update(StateKey s, int a, double r, StateKey t, bool done,
                const LearnerConfig &cfg) {
        if (!std::isfinite(r))
            throw std::invalid_argument("non-finite reward");
        Row &row = touch(s);
        double bootstrap = done ? 0.0 : cfg.gamma * max_value(t);
        row.q[a] += cfg.alpha * (r + bootstrap - row.q[a]);
        ++row.visits;
    }

    // Serialization: one "state action value" line per entry, sorted.
    void save(std::ostream &os) const {
        os.precision(17);
        os << "# qtable v1 actions=" << num_actions_
           << " default=" << default_value_ << "\n";
        std::map<StateKey, const Row *> sorted;
        for (const auto &[key, row] : rows_)
            sorted.emplace(key, &row);
        for (const auto &[key, row] : sorted)
            for (int a = 0; a < num_actions_; ++a)
                os << key << " " << a << " " << row->q[a] << "\n";
    }

    static QTable load(std::istream &is) {
        std::string header;
        std::getline(is, header);
        int actions = 0;
        double default_value = 0.0;
        if (sscanf(header.c_str(), "# qtable v1 actions=%d default=%lf", &actions,
                   &default_value) != 2)
            throw std::runtime_error("bad qtable header: " + header);
        QTable table(actions, default_value);
        StateKey key;
        int a;
        double v;
        while (is >> key >> a >> v)
            table.touch(key).q.at(a) = v;
        return table;
    }

private:
    struct Row {
        std::vector<double> q;
        int visits = 0;
    };

    Row &touch(StateKey s) {
        auto [it, inserted] = rows_.try_emplace(s);
        if (inserted)
            it->second.q.assign(num_actions_, default_value_);
        return it->second;
    }

    int num_actions_;
    double default_value_;
    std::unordered_map<StateKey, Row> rows_;
};

inline void q_update(QTable &table, StateKey s, int a, double r, StateKey t,
                     bool done, const LearnerConfig &cfg) {
    table.update(s, a, r, t, done, cfg);
}

// Epsilon-greedy with deterministic lowest-id tie-breaking at epsilon = 0.
inline int select_action(const QTable &table, StateKey s, double epsilon,
                         Rng &rng) {
    if (table.num_actions() <= 0)
        throw std::invalid_argument("empty action set");
    if (epsilon > 0 && rng.uniform() < epsilon)
        return rng.below(table.num_actions());
    return table.greedy_action(s);
}

} // namespace planrl
