/*
  Acceptance suite: one pass/fail line per criterion, nonzero exit when any
  criterion fails. Budgeted criteria also check their wall-clock limits.
*/

#include "planrl/cli.hpp"
#include "planrl/ground.hpp"
#include "planrl/hrl.hpp"
#include "planrl/verify.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

using namespace planrl;
using testsupport::data_file;
using testsupport::repo_path;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool condition, const std::string &what) {
        if (!condition) {
            ok = false;
            if (!detail.str().empty())
                detail << "; ";
            detail << what;
        }
    }

    void note(const std::string &what) {
        if (detail.str().empty())
            detail << what;
    }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

PlanningTask load_task(const std::string &domain, const std::string &problem) {
    auto d = pddl::parse_domain(data_file(domain));
    auto p = pddl::parse_problem(data_file(problem));
    return ground(d, p);
}

EnvSpec make_spec(const std::string &layout, RewardMode mode, int horizon,
                  SeedPolicy policy = SeedPolicy::RandomizeCells,
                  EnvMutation mutation = EnvMutation::None) {
    EnvSpec spec;
    spec.layout = parse_layout(data_file(layout));
    spec.reward_mode = mode;
    spec.horizon = horizon;
    spec.seed_policy = policy;
    spec.mutation = mutation;
    return spec;
}

struct ShippedPair {
    const char *layout, *domain, *problem;
    RewardMode mode;
};

const ShippedPair kShippedPairs[] = {
    {"layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
     "pddl/doorkey-8x8.pddl", RewardMode::MinigridSparse},
    {"layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
     "pddl/doorkey-8x8.pddl", RewardMode::MinigridSparse},
    {"layouts/balls-2x2.layout", "pddl/mazerooms-domain.pddl",
     "pddl/balls-2x2.pddl", RewardMode::MinigridSparse},
    {"layouts/locked-2x2.layout", "pddl/mazerooms-domain.pddl",
     "pddl/locked-2x2.pddl", RewardMode::MinigridSparse},
    {"layouts/lockeddoors-3x3.layout", "pddl/mazerooms-domain.pddl",
     "pddl/lockeddoors-3x3.pddl", RewardMode::MinigridSparse},
    {"layouts/nrooms-4-20.layout", "pddl/rooms-domain.pddl",
     "pddl/rooms-0-20-4.pddl", RewardMode::StepCost},
    {"layouts/nrooms-12-16.layout", "pddl/rooms-domain.pddl",
     "pddl/rooms-1-16-12.pddl", RewardMode::StepCost},
};

// ---------------------------------------------------------------- 1
Check criterion_pddl_fidelity() {
    Check c;
    auto start = std::chrono::steady_clock::now();
    struct File {
        const char *domain, *problem;
        int operators;
    };
    const File files[] = {
        {"pddl/mazerooms-domain.pddl", "pddl/doorkey-8x8.pddl", 10},
        {"pddl/mazerooms-domain.pddl", "pddl/balls-2x2.pddl", 6},
        {"pddl/mazerooms-domain.pddl", "pddl/locked-2x2.pddl", 26},
        {"pddl/mazerooms-domain.pddl", "pddl/lockeddoors-3x3.pddl", 90},
        {"pddl/rooms-domain.pddl", "pddl/rooms-1-16-12.pddl", 44},
        {"pddl/rooms-domain.pddl", "pddl/rooms-0-20-4.pddl", 16},
    };
    for (const auto &f : files) {
        auto d = pddl::parse_domain(data_file(f.domain));
        auto p = pddl::parse_problem(data_file(f.problem));
        int oracle = oracles::count_instantiations(d, p);
        c.require(oracle == f.operators,
                  std::string(f.problem) + ": instantiation oracle gives " +
                      std::to_string(oracle));
        PlanningTask task = ground(d, p);
        c.require((int)task.operators.size() == oracle,
                  std::string(f.problem) + ": grounder disagrees with oracle");
    }
    // One operator per directed CONNECTED-ROOMS pair on the rooms instance.
    {
        auto p = pddl::parse_problem(data_file("pddl/rooms-1-16-12.pddl"));
        int pairs = 0;
        for (const auto &a : p.init)
            pairs += a.predicate == "connected-rooms";
        c.require(pairs == 44, "directed pair count");
    }
    double t = seconds_since(start);
    c.require(t < 1.0, "runtime " + std::to_string(t) + "s over budget");
    c.note("6 task groundings match the instantiation oracle, " +
           std::to_string(t).substr(0, 5) + "s");
    return c;
}

// ---------------------------------------------------------------- 2
Check criterion_plan_reproduction() {
    Check c;
    auto start = std::chrono::steady_clock::now();
    {
        std::ostringstream out;
        int rc = cli::cmd_plan(repo_path("data/pddl/mazerooms-domain.pddl"),
                               repo_path("data/pddl/doorkey-8x8.pddl"), "blind",
                               "", out);
        c.require(rc == 0, "door-key plan exit code");
        const char *expected[] = {
            "action:0\n(pickup k-yellow-0 r-0-0)",
            "action:1\n(unlock k-yellow-0 d-yellow-0-0-1-0 r-0-0 r-1-0)",
            "action:2\n(move-room d-yellow-0-0-1-0 r-0-0 r-1-0)",
        };
        for (const char *needle : expected)
            c.require(out.str().find(needle) != std::string::npos,
                      std::string("missing ") + needle);
        c.require(out.str().find("action:3") == std::string::npos,
                  "door-key plan longer than 3 actions");
    }
    double t1 = seconds_since(start);
    c.require(t1 < 1.0, "door-key planning over 1s");
    auto mid = std::chrono::steady_clock::now();
    {
        std::ostringstream out;
        int rc = cli::cmd_plan(repo_path("data/pddl/mazerooms-domain.pddl"),
                               repo_path("data/pddl/lockeddoors-3x3.pddl"),
                               "blind", "", out);
        c.require(rc == 0, "nine-rooms plan exit code");
        const char *expected[] = {
            "action:0\n(move-room d-yellow-0-0-1-0 r-0-0 r-1-0)",
            "action:1\n(move-room d-yellow-1-0-2-0 r-1-0 r-2-0)",
            "action:2\n(move-room d-yellow-2-0-2-1 r-2-0 r-2-1)",
            "action:3\n(pickup k-yellow-0 r-2-1)",
            "action:4\n(unlock k-yellow-0 d-yellow-2-1-2-2 r-2-1 r-2-2)",
            "action:5\n(move-room d-yellow-2-1-2-2 r-2-1 r-2-2)",
        };
        for (const char *needle : expected)
            c.require(out.str().find(needle) != std::string::npos,
                      std::string("missing ") + needle);
        c.require(out.str().find("action:6") == std::string::npos,
                  "nine-rooms plan longer than 6 actions");
    }
    double t2 = seconds_since(mid);
    c.require(t2 < 1.0, "nine-rooms planning over 1s");
    c.note("both reference plans reproduced exactly");
    return c;
}

// ---------------------------------------------------------------- 3
Check criterion_definition_suite() {
    Check c;
    for (const auto &pair : kShippedPairs) {
        GridEnv env(make_spec(pair.layout, pair.mode, 256));
        PlanningTask task = load_task(pair.domain, pair.problem);
        AnnotatedTask annotated(env, task);
        GridState reset = env.reset(0);
        ProperReport report = annotated.is_proper(reset);
        c.require(report.proper, std::string(pair.layout) + " not proper: " +
                                     (report.witness ? report.witness->detail
                                                     : ""));
        c.require(annotated.options().size() == task.operators.size() + 1,
                  std::string(pair.problem) + " option count");
    }
    {
        GridEnv env(make_spec("layouts/doorkey-8x8.layout",
                              RewardMode::MinigridSparse, 256,
                              SeedPolicy::RandomizeCells,
                              EnvMutation::PhaseLockedDoors));
        PlanningTask task =
            load_task("pddl/mazerooms-domain.pddl", "pddl/doorkey-8x8.pddl");
        AnnotatedTask annotated(env, task);
        ProperReport report = annotated.is_proper(env.reset(0));
        c.require(!report.proper, "mutated env unexpectedly proper");
        c.require(report.witness.has_value(), "mutated env missing witness");
    }
    c.note("7 shipped pairs proper, mutated fixture rejected with witness");
    return c;
}

// ---------------------------------------------------------------- 4
Check criterion_bisimulation_implication() {
    Check c;
    auto start = std::chrono::steady_clock::now();

    // Shipped frame-preserving fixtures.
    struct Fixture {
        const char *layout, *domain, *problem;
        RewardMode mode;
        bool exhaustive;
    };
    const Fixture fixtures[] = {
        {"layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
         "pddl/doorkey-8x8.pddl", RewardMode::MinigridSparse, false},
        {"layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
         "pddl/doorkey-8x8.pddl", RewardMode::MinigridSparse, false},
        {"layouts/nrooms-4-20.layout", "pddl/rooms-domain.pddl",
         "pddl/rooms-0-20-4.pddl", RewardMode::StepCost, true},
    };
    for (const auto &f : fixtures) {
        GridEnv env(make_spec(f.layout, f.mode, 256));
        PlanningTask task = load_task(f.domain, f.problem);
        AnnotatedTask annotated(env, task);
        GridState reset = env.reset(0);
        EnumeratedMdp mdp = enumerate_mdp(env, reset);
        ScriptedOptionPolicy policy(annotated, mdp);
        SmdpBuildConfig cfg;
        cfg.exhaustive = f.exhaustive;
        SmdpGraph graph = smdp_transition_graph(
            annotated, mdp, f.exhaustive ? OptionPolicyFn{} : policy, cfg);
        auto frames = is_frame_preserving(annotated, graph);
        TransitionGraph planning_graph = build_transition_graph(task);
        auto bisim = check_bisimulation(planning_graph, graph, annotated);
        c.require(frames.preserved,
                  std::string(f.layout) + " fixture not frame preserving");
        c.require(bisim.holds,
                  std::string(f.layout) + " fixture fails bisimulation: " +
                      (bisim.witness ? bisim.witness->reason : ""));
    }

    // Randomized mutation harness on the small instance.
    {
        GridEnv env(make_spec("layouts/doorkey-6x6.layout",
                              RewardMode::MinigridSparse, 256));
        PlanningTask task =
            load_task("pddl/mazerooms-domain.pddl", "pddl/doorkey-8x8.pddl");
        AnnotatedTask annotated(env, task);
        GridState reset = env.reset(0);
        EnumeratedMdp mdp = enumerate_mdp(env, reset);
        ScriptedOptionPolicy scripted(annotated, mdp);
        TransitionGraph planning_graph = build_transition_graph(task);
        Rng rng(7777);
        int falsified = 0, broken_count = 0;
        const int mutations = 120;
        for (int trial = 0; trial < mutations; ++trial) {
            uint64_t salt = rng.next();
            int rate_bits = 1 + (int)(rng.next() % 4);
            // Half the trials sprinkle random actions; the other half also
            // sneak a key drop into randomly chosen move options, which
            // perturbs the context mid-option.
            bool drop_happy = trial % 2 == 1;
            auto mutated = [&, salt, rate_bits, drop_happy](int oi,
                                                            const GridState &s) {
                uint64_t h =
                    s.encode() * 0x9e3779b97f4a7c15ULL + salt + (uint64_t)oi;
                const OptionSpec &option = annotated.option(oi);
                if (drop_happy && !option.is_goal_option() &&
                    option.id.starts_with("(move-room") && s.carried_key >= 0 &&
                    (h & 1) == 0) {
                    GridState dropped =
                        env.step(s, MinigridAction::Drop).state;
                    if (dropped.carried_key < 0)
                        return (int)MinigridAction::Drop;
                }
                if ((h >> 13 & ((1u << rate_bits) - 1)) == 0)
                    return (int)(h % (uint64_t)env.num_actions());
                return scripted(oi, s);
            };
            SmdpGraph graph = smdp_transition_graph(annotated, mdp, mutated);
            auto frames = is_frame_preserving(annotated, graph);
            auto bisim = check_bisimulation(planning_graph, graph, annotated);
            broken_count += !frames.preserved;
            if (frames.preserved && !bisim.holds)
                ++falsified;
        }
        c.require(falsified == 0, "implication falsified by mutation");
        c.require(broken_count > 0, "harness produced no frame-breaking case");
        c.note("3 fixtures hold; " + std::to_string(mutations) +
               " mutations (" + std::to_string(broken_count) +
               " frame-breaking) never falsify the implication");
    }
    double t = seconds_since(start);
    c.require(t < 60.0, "runtime " + std::to_string(t) + "s over budget");
    return c;
}

// ---------------------------------------------------------------- 5
Check criterion_frame_monotonicity() {
    Check c;
    auto start = std::chrono::steady_clock::now();
    const char *fixtures[][3] = {
        {"layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
         "pddl/doorkey-8x8.pddl"},
        {"layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
         "pddl/doorkey-8x8.pddl"},
        {"layouts/locked-2x2.layout", "pddl/mazerooms-domain.pddl",
         "pddl/locked-2x2.pddl"},
    };
    for (const auto &f : fixtures) {
        GridEnv env(make_spec(f[0], RewardMode::MinigridSparse, 256));
        PlanningTask task = load_task(f[1], f[2]);
        AnnotatedTask annotated(env, task);
        GridState reset = env.reset(0);
        EnumeratedMdp mdp = enumerate_mdp(env, reset);
        Rng rng(515);
        int done = 0;
        while (done < 100) {
            const GridState &entry =
                mdp.states[rng.below((int)mdp.states.size())];
            int oi = rng.below((int)annotated.options().size());
            const OptionSpec &option = annotated.option(oi);
            if (option.is_goal_option() || !annotated.initiation(option, entry))
                continue;
            FrameSnapshot snap = annotated.context_and_frame(option, entry);
            std::vector<FactId> q_ids, p_ids;
            for (FactId fact : snap.frame)
                if (rng.below(2))
                    q_ids.push_back(fact);
            FactSet frame_q(std::move(q_ids));
            for (FactId fact : frame_q)
                if (rng.below(2))
                    p_ids.push_back(fact);
            FactSet frame_p(std::move(p_ids));
            auto report = check_frame_monotonicity(mdp, annotated, option,
                                                   entry, frame_p, frame_q);
            c.require(report.holds, std::string(f[0]) + " monotonicity");
            ++done;
        }
    }
    double t = seconds_since(start);
    c.require(t < 60.0, "runtime " + std::to_string(t) + "s over budget");
    c.note("3 fixtures x 100 nested frame pairs");
    return c;
}

// ---------------------------------------------------------------- 6
Check criterion_oracle_equivalence() {
    Check c;
    // Tabular q-learning vs value iteration on a ten-state corridor.
    {
        MdpModel m;
        const int n = 10;
        m.resize(n, 2);
        m.goal[n - 1] = 1;
        for (int s = 0; s < n; ++s) {
            if (m.goal[s]) {
                m.transitions[m.row(s, 0)] = {{s, 1.0}};
                m.transitions[m.row(s, 1)] = {{s, 1.0}};
                continue;
            }
            m.transitions[m.row(s, 0)] = {{std::max(0, s - 1), 1.0}};
            m.transitions[m.row(s, 1)] = {{s + 1, 1.0}};
            m.reward[m.row(s, 1)] = s + 1 == n - 1 ? 1.0 : 0.0;
        }
        LearnerConfig cfg;
        cfg.gamma = 0.9;
        cfg.alpha = 0.5;
        QTable table(2);
        for (int sweep = 0; sweep < 400; ++sweep)
            for (int s = 0; s < n - 1; ++s)
                for (int a = 0; a < 2; ++a) {
                    int t = m.transitions[m.row(s, a)][0].target;
                    q_update(table, s, a, m.reward[m.row(s, a)], t,
                             m.goal[t] != 0, cfg);
                }
        auto vi = value_iteration(m, cfg.gamma, 1e-12);
        c.require(vi.converged, "value iteration did not converge");
        double sup = 0;
        for (int s = 0; s < n - 1; ++s)
            sup = std::max(sup, std::abs(table.max_value(s) - vi.values[s]));
        c.require(sup < 1e-6,
                  "q-learning sup-norm gap " + std::to_string(sup));
        c.note("chain sup-norm gap " + std::to_string(sup));
    }
    // Blind A* costs equal BFS distances on every shipped task.
    const char *tasks[][2] = {
        {"pddl/mazerooms-domain.pddl", "pddl/doorkey-8x8.pddl"},
        {"pddl/mazerooms-domain.pddl", "pddl/balls-2x2.pddl"},
        {"pddl/mazerooms-domain.pddl", "pddl/locked-2x2.pddl"},
        {"pddl/mazerooms-domain.pddl", "pddl/lockeddoors-3x3.pddl"},
        {"pddl/rooms-domain.pddl", "pddl/rooms-1-16-12.pddl"},
        {"pddl/rooms-domain.pddl", "pddl/rooms-0-20-4.pddl"},
    };
    for (const auto &t : tasks) {
        PlanningTask task = load_task(t[0], t[1]);
        int bfs = oracles::bfs_goal_distance(task, task.init, task.goal);
        SearchResult r = astar(task, task.init, Heuristic::Blind);
        c.require(r.solved() && r.plan->cost() == bfs,
                  std::string(t[1]) + " blind cost vs BFS");
    }
    return c;
}

// ---------------------------------------------------------------- 7
Check criterion_desk_scale_learning() {
    Check c;
    auto start = std::chrono::steady_clock::now();
    const int budget = 50000;
    auto run = [&](Algorithm algorithm, uint32_t seed) {
        GridEnv env(make_spec("layouts/nrooms-4-20.layout", RewardMode::StepCost,
                              256, SeedPolicy::RandomizeRoomsAndCells));
        PlanningTask task =
            load_task("pddl/rooms-domain.pddl", "pddl/rooms-0-20-4.pddl");
        AnnotatedTask annotated(env, task);
        TrainConfig cfg;
        cfg.iterations = 1 << 28;
        cfg.rollout_steps = 2048;
        cfg.max_episodes = budget;
        cfg.eval_every_episodes = 1000;
        cfg.eval_episodes = 32;
        cfg.stop_at_success = 0.9;
        cfg.intrinsic.step_penalty = -0.05;
        cfg.learner.alpha = 0.3;
        cfg.learner.default_value = -4.0;
        cfg.replay_passes = 8;
        cfg.seed = seed;
        Trainer trainer(env, annotated, algorithm, cfg);
        return trainer.train().episodes_to_reach(0.9);
    };

    std::vector<int> hplanq, flat;
    for (uint32_t seed = 0; seed < 5; ++seed) {
        hplanq.push_back(run(Algorithm::HplanQPerOption, seed));
        flat.push_back(run(Algorithm::FlatQ, seed));
    }
    auto median = [](std::vector<int> v) {
        // episodes-to-threshold; -1 (never) sorts as worst
        for (int &x : v)
            if (x < 0)
                x = 1 << 30;
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    int hplanq_median = median(hplanq);
    int flat_median = median(flat);
    c.require(hplanq_median <= budget,
              "planner-guided learner missed 0.9 within the budget");
    c.require(flat_median > hplanq_median,
              "flat baseline reached 0.9 at least as fast");
    std::ostringstream note;
    note << "episodes to 0.9 (median of 5 seeds): planner-guided "
         << hplanq_median << ", flat "
         << (flat_median >= (1 << 30) ? std::string("never (50k budget)")
                                      : std::to_string(flat_median));
    c.note(note.str());
    double t = seconds_since(start);
    c.require(t < 600.0, "runtime " + std::to_string(t) + "s over budget");
    return c;
}

// ---------------------------------------------------------------- 8
Check criterion_option_reuse() {
    Check c;
    auto start = std::chrono::steady_clock::now();
    GridLayout layout = parse_layout(data_file("layouts/nrooms-12-16.layout"));
    const std::pair<const char *, const char *> instances[] = {
        {"r0", "r11"}, {"r1", "r5"},  {"r6", "r0"}, {"r7", "r1"},
        {"r10", "r5"}, {"r6", "r11"}, {"r0", "r8"}, {"r7", "r11"},
    };

    auto solve_instance = [&](const char *from, const char *to, uint32_t seed,
                              OptionRegistry *carried) {
        EnvSpec spec;
        spec.layout = layout;
        spec.layout.start_room = spec.layout.find_room(from);
        spec.layout.goal_room = spec.layout.find_room(to);
        spec.reward_mode = RewardMode::StepCost;
        spec.horizon = 256;
        GridEnv env(spec);
        auto d = pddl::parse_domain(data_file("pddl/rooms-domain.pddl"));
        auto p = pddl::parse_problem(rooms_problem_text(layout, from, to));
        PlanningTask task = ground(d, p);
        AnnotatedTask annotated(env, task);
        TrainConfig cfg;
        cfg.iterations = 1 << 28;
        cfg.rollout_steps = 1024;
        cfg.max_episodes = 15000;
        cfg.eval_every_episodes = 200;
        cfg.eval_episodes = 8;
        cfg.stop_at_success = 1.0;
        cfg.intrinsic.step_penalty = -0.05;
        cfg.learner.alpha = 0.3;
        cfg.learner.default_value = -4.0;
        cfg.replay_passes = 8;
        cfg.seed = seed;
        Trainer trainer(env, annotated, Algorithm::HplanQPerOption, cfg);
        if (carried)
            trainer.registry() = std::move(*carried);
        TrainingLog log = trainer.train();
        if (carried)
            *carried = std::move(trainer.registry());
        return log.total_env_steps;
    };

    std::vector<double> ratios;
    for (uint32_t seed = 0; seed < 5; ++seed) {
        OptionRegistry carried;
        long with_reuse = 0, without_reuse = 0;
        for (const auto &[from, to] : instances)
            with_reuse += solve_instance(from, to, seed, &carried);
        for (const auto &[from, to] : instances)
            without_reuse += solve_instance(from, to, seed, nullptr);
        ratios.push_back((double)with_reuse / (double)without_reuse);
    }
    std::sort(ratios.begin(), ratios.end());
    double median = ratios[ratios.size() / 2];
    c.require(median <= 0.8, "median reuse ratio " + std::to_string(median));
    std::ostringstream note;
    note << "cumulative steps with reuse / without: median "
         << std::round(median * 1000) / 1000 << " over 5 seeds";
    c.note(note.str());
    double t = seconds_since(start);
    c.require(t < 600.0, "runtime " + std::to_string(t) + "s over budget");
    return c;
}

// ---------------------------------------------------------------- 9
Check criterion_intrinsic_reward_suite() {
    Check c;
    GridEnv env(make_spec("layouts/doorkey-8x8.layout",
                          RewardMode::MinigridSparse, 256));
    PlanningTask task =
        load_task("pddl/mazerooms-domain.pddl", "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(env, task);

    IntrinsicRewardConfig rewards;
    rewards.frame_violation_penalty = -1.0;
    rewards.step_penalty = -0.9 / 1024;
    rewards.termination_bonus = 1.0;

    GridState s = env.reset(0);
    s.carried_key = 0;
    s.key_cells[0] = -1;
    s.locked_mask = 0;
    const OptionSpec &move = annotated.option(
        annotated.find_option("(move-room d-yellow-0-0-1-0 r-0-0 r-1-0)"));
    FrameSnapshot snap = annotated.context_and_frame(move, s, rewards);

    c.require(std::abs(annotated.intrinsic_reward(snap, move, s) -
                       (-0.9 / 1024)) < 1e-12,
              "clean non-terminal value");
    GridState dropped = s;
    dropped.carried_key = -1;
    dropped.key_cells[0] = (int16_t)env.layout().cell(1, 1);
    c.require(std::abs(annotated.intrinsic_reward(snap, move, dropped) -
                       (-1.0 - 0.9 / 1024)) < 1e-12,
              "one-violation value");
    GridState crossed = s;
    crossed.agent_cell = (uint16_t)env.layout().cell(1, 5);
    if ((int)crossed.agent_cell == env.goal_cell())
        crossed.agent_cell = (uint16_t)env.layout().cell(2, 5);
    c.require(std::abs(annotated.intrinsic_reward(snap, move, crossed) - 1.0) <
                  1e-12,
              "terminal bonus value");

    // Twenty randomized pairs against a direct membership recount.
    GridEnv big(make_spec("layouts/lockeddoors-3x3.layout",
                          RewardMode::MinigridSparse, 256));
    PlanningTask big_task =
        load_task("pddl/mazerooms-domain.pddl", "pddl/lockeddoors-3x3.pddl");
    AnnotatedTask big_annotated(big, big_task);
    GridState reset = big.reset(0);
    auto states = big.enumerate_states(reset);
    Rng rng(909);
    IntrinsicRewardConfig rc;
    rc.step_penalty = -0.05;
    int done = 0;
    while (done < 20) {
        const GridState &entry = states[rng.below((int)states.size())];
        const GridState &probe = states[rng.below((int)states.size())];
        int oi = rng.below((int)big_annotated.options().size());
        const OptionSpec &option = big_annotated.option(oi);
        if (option.is_goal_option() || !big_annotated.initiation(option, entry))
            continue;
        FrameSnapshot frame = big_annotated.context_and_frame(option, entry, rc);
        FactSet image = big_annotated.mapper().to_facts(probe);
        int violations = 0;
        for (FactId f : frame.frame)
            violations += !image.contains(f);
        double expected =
            rc.frame_violation_penalty * violations +
            (big_annotated.termination(option, probe) ? rc.termination_bonus
                                                      : rc.step_penalty);
        c.require(std::abs(big_annotated.intrinsic_reward(frame, option, probe) -
                           expected) < 1e-12,
                  "randomized recount mismatch");
        ++done;
    }
    c.note("3 pinned values and 20 randomized recounts match");
    return c;
}

} // namespace

int main() {
    struct Criterion {
        const char *name;
        std::function<Check()> run;
    };
    const Criterion criteria[] = {
        {"1 pddl-fidelity", criterion_pddl_fidelity},
        {"2 plan-reproduction", criterion_plan_reproduction},
        {"3 definition-suite", criterion_definition_suite},
        {"4 bisimulation-implication", criterion_bisimulation_implication},
        {"5 frame-monotonicity", criterion_frame_monotonicity},
        {"6 oracle-equivalence", criterion_oracle_equivalence},
        {"7 desk-scale-learning", criterion_desk_scale_learning},
        {"8 option-reuse", criterion_option_reuse},
        {"9 intrinsic-reward-suite", criterion_intrinsic_reward_suite},
    };

    int failures = 0;
    for (const auto &criterion : criteria) {
        auto start = std::chrono::steady_clock::now();
        Check check;
        try {
            check = criterion.run();
        } catch (const std::exception &e) {
            check.ok = false;
            check.detail << "exception: " << e.what();
        }
        double t = seconds_since(start);
        std::cout << (check.ok ? "[PASS] " : "[FAIL] ") << "criterion "
                  << criterion.name;
        if (!check.detail.str().empty())
            std::cout << " — " << check.detail.str();
        std::cout << " (" << std::fixed << std::setprecision(1) << t << "s)"
                  << std::defaultfloat << "\n";
        failures += !check.ok;
    }
    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
