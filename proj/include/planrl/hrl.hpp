#pragma once

#include "planrl/annotation.hpp"
#include "planrl/qlearning.hpp"
#include "planrl/search.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace planrl {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Algorithm { HplanQPerOption, HplanQShared, FlatQ };

inline Algorithm algorithm_from_name(const std::string &name) {
    if (name == "hplanq-per-option")
        return Algorithm::HplanQPerOption;
    if (name == "hplanq-shared")
        return Algorithm::HplanQShared;
    if (name == "flat-q")
        return Algorithm::FlatQ;
    throw std::invalid_argument("unknown algorithm " + name);
}

struct TrainConfig {
    int iterations = 1000;      // rollout/train alternations
    int rollout_steps = 2048;   // env steps per rollout phase
    int option_step_cap = 0;    // 0: horizon / 4
    int replay_passes = 4;      // sweeps over the buffer per train phase
    IntrinsicRewardConfig intrinsic;
    LearnerConfig learner;
    bool mix_extrinsic_into_options = false;
    int eval_every_episodes = 1000;
    int eval_episodes = 32;
    int max_episodes = 50000;
    double stop_at_success = -1.0; // stop once an eval reaches this rate
    uint32_t seed = 0;
    Heuristic heuristic = Heuristic::GoalCount;

    void validate() const {
        learner.validate();
        if (rollout_steps <= 0 || max_episodes <= 0 || eval_episodes <= 0)
            throw std::invalid_argument("positive caps required");
    }
};

struct TransitionRecord {
    int option; // option index; -1 for the flat learner
    StateKey state;
    int action;
    double env_reward;
    double intrinsic_reward;
    StateKey next_state;
    bool option_done; // no bootstrap past this record
};

struct TrajectoryBuffer {
    std::vector<TransitionRecord> records;

    void clear() { records.clear(); }
};

struct EvalResult {
    double success_rate = 0.0;
    double mean_episode_length = 0.0;
    int missing_option_tables = 0;
};

struct EpisodeRecord {
    int episode;
    long env_steps;
    double extrinsic_return;
    bool success;
    int length;
};

struct EvalRecord {
    int iteration;
    int episode;
    long env_steps;
    double success_rate;
    double mean_episode_length;
};

struct OptionWindowStats {
    long executions = 0;
    long terminations = 0;
    long steps = 0;
};

struct TrainingLog {
    std::vector<EpisodeRecord> episodes;
    std::vector<EvalRecord> evals;
    // Option id -> per-eval-window (executions, terminations, steps).
    std::map<std::string, std::vector<OptionWindowStats>> option_curves;
    long total_env_steps = 0;

    // First eval episode count whose success rate reaches `threshold`;
    // -1 when never reached.
    int episodes_to_reach(double threshold) const {
        for (const auto &e : evals)
            if (e.success_rate >= threshold)
                return e.episode;
        return -1;
    }
};

// Alg. 2's D: options instantiated per abstract state, plus the lazily
// created per-option value tables.
class OptionRegistry {
public:
    void instantiate(const FactSet &abstract_state, int option_index) {
        auto &at = by_state_[abstract_state];
        for (int o : at)
            if (o == option_index)
                return;
        at.push_back(option_index);
    }

    const std::vector<int> *options_at(const FactSet &abstract_state) const {
        auto it = by_state_.find(abstract_state);
        return it == by_state_.end() ? nullptr : &it->second;
    }

    bool has_table(int option_index) const {
        return tables_.count(option_index) > 0;
    }

    QTable &table(int option_index, int num_actions, double default_value) {
        auto it = tables_.find(option_index);
        if (it == tables_.end())
            it = tables_
                     .emplace(option_index, QTable(num_actions, default_value))
                     .first;
        return it->second;
    }

    const QTable *find_table(int option_index) const {
        auto it = tables_.find(option_index);
        return it == tables_.end() ? nullptr : &it->second;
    }

    std::map<int, const QTable *> all_tables() const {
        std::map<int, const QTable *> out;
        for (const auto &[k, v] : tables_)
            out.emplace(k, &v);
        return out;
    }

    size_t num_abstract_states() const { return by_state_.size(); }

private:
    std::unordered_map<FactSet, std::vector<int>, FactSetHash> by_state_;
    std::unordered_map<int, QTable> tables_;
};

namespace detail {

inline StateKey mix_keys(StateKey a, uint64_t b) {
    uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return x;
}

} // namespace detail

/*
  The online option-learning loop: the planner picks the next option from
  the current abstract state, the option's tabular policy rolls it out
  under intrinsic rewards, and alternating train phases replay the buffer
  into the option tables. Flat Q-learning shares the same episode/eval
  bookkeeping so the two are comparable curve-for-curve.
*/
class Trainer {
public:
    Trainer(GridEnv &env, const AnnotatedTask &annotated, Algorithm algorithm,
            TrainConfig cfg)
        : env_(&env), annotated_(&annotated), algorithm_(algorithm),
          cfg_(std::move(cfg)),
          shared_table_(env.num_actions(), cfg_.learner.default_value) {
        cfg_.validate();
        if (cfg_.option_step_cap <= 0)
            cfg_.option_step_cap = std::max(1, env.horizon() / 4);
    }

    OptionRegistry &registry() { return registry_; }
    const OptionRegistry &registry() const { return registry_; }
    QTable &shared_table() { return shared_table_; }
    const QTable &shared_table() const { return shared_table_; }

    // State keys: operator options ignore the episode goal (their task is
    // goal-independent), the goal option and the flat learner include it.
    StateKey option_state_key(int option_index, const GridState &s) const {
        StateKey key = s.encode();
        if (option_index < 0 ||
            annotated_->option(option_index).is_goal_option())
            key = detail::mix_keys(key, (uint64_t)env_->goal_cell() + 1);
        return key;
    }

    StateKey table_key(int option_index, const GridState &s) const {
        StateKey key = option_state_key(option_index, s);
        if (algorithm_ == Algorithm::HplanQShared)
            key = detail::mix_keys(key, (uint64_t)(option_index + 1) << 32);
        return key;
    }

    /*
      Planner-as-controller: replan from L(s) to the episode goal, pick the
      plan's first operator's option, and instantiate options along the
      plan. Already-satisfied goals select the goal option.
    */
    int select_option_index(const GridState &s) {
        FactSet image = annotated_->mapper().to_facts(s);
        FactSet goal;
        try {
            goal = annotated_->mapper().abstract_goal();
        } catch (const std::runtime_error &e) {
            throw TrainError(std::string("abstract goal not expressible in "
                                         "the annotation: ") +
                             e.what());
        }
        if (goal.is_subset_of(image))
            return (int)annotated_->options().size() - 1;

        uint64_t cache_key = detail::mix_keys(image.hash(), goal.hash());
        auto cached = plan_cache_.find(cache_key);
        if (cached != plan_cache_.end())
            return cached->second;

        SearchResult result =
            astar(annotated_->task(), image, cfg_.heuristic, goal);
        if (!result.solved())
            throw TrainError("planner found no plan from abstract state { " +
                             annotated_->task().fact_set_str(image) + " }");

        // Instantiate the options for every operator along the plan.
        FactSet walk = image;
        int selected = -1;
        for (OperatorIndex op : result.plan->operators) {
            int option_index = (int)op; // options align with operator indices
            registry_.instantiate(walk, option_index);
            if (selected < 0)
                selected = option_index;
            walk = apply(walk, annotated_->task().operators[op]);
        }
        plan_cache_.emplace(cache_key, selected);
        return selected;
    }

    struct RolloutEnd {
        enum Kind { Terminated, OptionCap, EpisodeDone, HorizonHit } kind;
        int steps = 0;
    };

    /*
      Call-and-return execution of one option with epsilon-greedy actions;
      every step is recorded with both the env reward and the option's
      intrinsic reward.
    */
    RolloutEnd rollout_option(GridState &s, int option_index, double epsilon,
                              Rng &rng, TrajectoryBuffer &buffer,
                              double *extrinsic_return) {
        const OptionSpec &option = annotated_->option(option_index);
        FrameSnapshot snap =
            option.is_goal_option()
                ? annotated_->goal_snapshot(s, cfg_.intrinsic)
                : annotated_->context_and_frame(option, s, cfg_.intrinsic);
        QTable &table = active_table(option_index);

        RolloutEnd end{RolloutEnd::OptionCap, 0};
        if (annotated_->termination(option, s)) {
            end.kind = RolloutEnd::Terminated;
            return end; // zero-length execution
        }
        for (int step = 0; step < cfg_.option_step_cap; ++step) {
            StateKey s_key = table_key(option_index, s);
            int action = select_action(table, s_key, epsilon, rng);
            StepResult r = env_->step(s, action);
            ++end.steps;
            *extrinsic_return += r.reward;

            bool terminated = annotated_->termination(option, r.state);
            bool env_goal = env_->is_goal(r.state);
            TransitionRecord record;
            record.option = option_index;
            record.state = s_key;
            record.action = action;
            record.env_reward = r.reward;
            record.intrinsic_reward =
                annotated_->intrinsic_reward(snap, option, r.state);
            record.next_state = table_key(option_index, r.state);
            record.option_done = terminated || env_goal;
            buffer.records.push_back(record);

            s = r.state;
            if (terminated) {
                end.kind = RolloutEnd::Terminated;
                return end;
            }
            if (env_goal || r.done) {
                end.kind = r.state.step_count >= env_->horizon() && !env_goal
                               ? RolloutEnd::HorizonHit
                               : RolloutEnd::EpisodeDone;
                return end;
            }
        }
        return end;
    }

    // Replays the buffer newest-to-oldest so terminal bonuses propagate
    // through a whole rollout within a single pass.
    void train_from_buffer(const TrajectoryBuffer &buffer) {
        for (int pass = 0; pass < cfg_.replay_passes; ++pass) {
            for (auto it = buffer.records.rbegin(); it != buffer.records.rend();
                 ++it) {
                const TransitionRecord &record = *it;
                QTable &table = active_table(record.option);
                double reward = record.intrinsic_reward;
                if (cfg_.mix_extrinsic_into_options || record.option < 0)
                    reward = record.option < 0
                                 ? record.env_reward
                                 : reward + record.env_reward;
                q_update(table, record.state, record.action, reward,
                         record.next_state, record.option_done, cfg_.learner);
            }
        }
    }

    TrainingLog train() {
        TrainingLog log;
        Rng rng(cfg_.seed * 0x9e3779b9u + 17);
        TrajectoryBuffer buffer;

        int episode = 0;
        int iteration = 0;
        long env_steps = 0;
        GridState s = env_->reset(reset_seed(episode));
        double episode_return = 0.0;
        std::map<std::string, OptionWindowStats> window;
        int next_eval_at = cfg_.eval_every_episodes;
        bool stop = false;

        auto finish_episode = [&](bool success) {
            log.episodes.push_back({episode, env_steps, episode_return, success,
                                    (int)s.step_count});
            ++episode;
            episode_return = 0.0;
            // Evaluation resets the shared env, so it must run before the
            // next training episode's reset is drawn.
            if (episode >= next_eval_at || episode >= cfg_.max_episodes) {
                EvalResult eval = evaluate(cfg_.eval_episodes);
                log.evals.push_back({iteration, episode, env_steps,
                                     eval.success_rate,
                                     eval.mean_episode_length});
                for (auto &[id, stats] : window)
                    log.option_curves[id].push_back(stats);
                window.clear();
                next_eval_at += cfg_.eval_every_episodes;
                if (cfg_.stop_at_success >= 0 &&
                    eval.success_rate >= cfg_.stop_at_success)
                    stop = true;
            }
            if (episode >= cfg_.max_episodes)
                stop = true;
            if (!stop)
                s = env_->reset(reset_seed(episode));
        };

        for (iteration = 0; iteration < cfg_.iterations && !stop; ++iteration) {
            // rollout phase
            int steps_this_phase = 0;
            while (steps_this_phase < cfg_.rollout_steps && !stop) {
                double epsilon = cfg_.learner.epsilon.at(
                    (double)episode / cfg_.max_episodes);
                if (algorithm_ == Algorithm::FlatQ) {
                    StateKey key = table_key(-1, s);
                    int action = select_action(shared_table_, key, epsilon, rng);
                    StepResult r = env_->step(s, action);
                    ++env_steps;
                    ++steps_this_phase;
                    episode_return += r.reward;
                    q_update(shared_table_, key, action, r.reward,
                             table_key(-1, r.state),
                             env_->is_goal(r.state), cfg_.learner);
                    bool success = env_->is_goal(r.state);
                    s = r.state;
                    if (r.done)
                        finish_episode(success);
                } else {
                    int option_index = select_option_index(s);
                    RolloutEnd end = rollout_option(s, option_index, epsilon,
                                                    rng, buffer,
                                                    &episode_return);
                    env_steps += end.steps;
                    steps_this_phase += std::max(1, end.steps);
                    auto &stats = window[annotated_->option(option_index).id];
                    ++stats.executions;
                    stats.steps += end.steps;
                    stats.terminations += end.kind == RolloutEnd::Terminated;
                    if (env_->is_goal(s) || s.step_count >= env_->horizon())
                        finish_episode(env_->is_goal(s));
                }
            }
            // train phase
            if (algorithm_ != Algorithm::FlatQ) {
                train_from_buffer(buffer);
                if (algorithm_ == Algorithm::HplanQPerOption)
                    buffer.clear();
                else
                    trim_buffer(buffer);
            }
        }
        if (log.evals.empty() ||
            (!log.episodes.empty() && log.evals.back().episode != episode)) {
            EvalResult eval = evaluate(cfg_.eval_episodes);
            log.evals.push_back({iteration, episode, env_steps,
                                 eval.success_rate,
                                 eval.mean_episode_length});
            for (auto &[id, stats] : window)
                log.option_curves[id].push_back(stats);
        }
        log.total_env_steps = env_steps;
        return log;
    }

    /*
      Greedy evaluation: epsilon 0, fixed eval seeds, no learning. An
      episode whose selected option has no table yet counts as a failure.
    */
    EvalResult evaluate(int episodes) {
        EvalResult result;
        long total_length = 0;
        int successes = 0;
        Rng rng(0xe7a1u);
        for (int i = 0; i < episodes; ++i) {
            GridState s = env_->reset(eval_seed(i));
            bool success = env_->is_goal(s);
            bool missing = false;
            while (!success && s.step_count < env_->horizon()) {
                if (algorithm_ == Algorithm::FlatQ) {
                    StateKey key = table_key(-1, s);
                    StepResult r =
                        env_->step(s, shared_table_.greedy_action(key));
                    s = r.state;
                    success = env_->is_goal(s);
                    continue;
                }
                int option_index = select_option_index(s);
                if (algorithm_ == Algorithm::HplanQPerOption &&
                    !registry_.has_table(option_index)) {
                    missing = true;
                    break;
                }
                TrajectoryBuffer scratch;
                double unused = 0.0;
                RolloutEnd end =
                    rollout_option(s, option_index, 0.0, rng, scratch, &unused);
                success = env_->is_goal(s);
                if (end.steps == 0)
                    break; // stalled selection; avoid spinning forever
            }
            result.missing_option_tables += missing;
            successes += success;
            total_length += success ? s.step_count : env_->horizon();
        }
        result.success_rate = (double)successes / episodes;
        result.mean_episode_length = (double)total_length / episodes;
        return result;
    }

    uint32_t reset_seed(int episode) const {
        return cfg_.seed * 1000003u + (uint32_t)episode;
    }

    uint32_t eval_seed(int i) const { return 0x40000000u + (uint32_t)i; }

private:
    QTable &active_table(int option_index) {
        if (algorithm_ == Algorithm::HplanQPerOption && option_index >= 0)
            return registry_.table(option_index, env_->num_actions(),
                                   cfg_.learner.default_value);
        return shared_table_;
    }

    void trim_buffer(TrajectoryBuffer &buffer) {
        const size_t cap = 200000;
        if (buffer.records.size() > cap)
            buffer.records.erase(buffer.records.begin(),
                                 buffer.records.end() - cap);
    }

    GridEnv *env_;
    const AnnotatedTask *annotated_;
    Algorithm algorithm_;
    TrainConfig cfg_;
    OptionRegistry registry_;
    QTable shared_table_;
    std::unordered_map<uint64_t, int> plan_cache_;
};

} // namespace planrl
