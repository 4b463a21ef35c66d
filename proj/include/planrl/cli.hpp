#pragma once

#include "planrl/ground.hpp"
#include "planrl/hrl.hpp"
#include "planrl/run_config.hpp"
#include "planrl/trace.hpp"
#include "planrl/verify.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace planrl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnsolvable = 1;
inline constexpr int kExitError = 2;
inline constexpr int kExitBudget = 3;

namespace detail {

inline std::string slurp(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline PlanningTask load_task(const std::string &domain_path,
                              const std::string &problem_path) {
    auto domain = pddl::parse_domain(slurp(domain_path));
    auto problem = pddl::parse_problem(slurp(problem_path));
    if (!problem.domain_name.empty() && problem.domain_name != domain.name)
        std::cerr << "warning: problem names domain '" << problem.domain_name
                  << "' but the domain file defines '" << domain.name << "'\n";
    return ground(domain, problem);
}

// Output root: the config's dir, optionally re-rooted by $PLANRL_OUT.
inline std::filesystem::path output_root(const RunConfig &cfg) {
    std::filesystem::path dir(cfg.output_dir);
    if (const char *root = std::getenv("PLANRL_OUT"))
        dir = std::filesystem::path(root) / dir;
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::HplanQPerOption:
        return "hplanq-per-option";
    case Algorithm::HplanQShared:
        return "hplanq-shared";
    case Algorithm::FlatQ:
        return "flat-q";
    }
    return "unknown";
}

inline FactSet parse_fact_set_file(const std::string &path,
                                   const PlanningTask &task) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::vector<FactId> ids;
    std::string line;
    while (std::getline(in, line)) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == ';')
            continue;
        auto last = line.find_last_not_of(" \t\r");
        std::string text = line.substr(first, last - first + 1);
        // (predicate arg arg ...)
        if (text.size() < 2 || text.front() != '(' || text.back() != ')')
            throw std::runtime_error("bad fact line: " + text);
        std::istringstream is(text.substr(1, text.size() - 2));
        pddl::Atom atom;
        is >> atom.predicate;
        std::string arg;
        while (is >> arg)
            atom.args.push_back(arg);
        for (auto &c : atom.predicate)
            c = (char)std::tolower((unsigned char)c);
        for (auto &a : atom.args)
            for (auto &c : a)
                c = (char)std::tolower((unsigned char)c);
        ids.push_back(task.require_fact(atom));
    }
    return FactSet(std::move(ids));
}

} // namespace detail

inline int cmd_parse(const std::string &domain_path,
                     const std::string &problem_path, std::ostream &os) {
    auto domain = pddl::parse_domain(detail::slurp(domain_path));
    auto problem = pddl::parse_problem(detail::slurp(problem_path));
    PlanningTask task = ground(domain, problem);

    os << "domain: " << domain.name << "\n";
    os << "problem: " << problem.name << "\n";
    auto statics = static_predicates(domain);
    os << "static predicates:";
    for (const auto &p : statics)
        os << " " << p;
    os << "\n";
    os << "facts: " << task.facts.size() << "\n";
    os << "operators: " << task.operators.size() << "\n";
    os << "init facts: " << task.init.size() << "\n";
    os << "goal facts: " << task.goal.size() << "\n";
    if (!task.goal_reachable_in_relaxation)
        os << "note: goal unreachable even in the delete relaxation\n";
    for (const auto &warning : task.warnings)
        os << "note: " << warning << "\n";
    return kExitOk;
}

inline int cmd_plan(const std::string &domain_path,
                    const std::string &problem_path,
                    const std::string &heuristic_name,
                    const std::string &from_file, std::ostream &os) {
    PlanningTask task = detail::load_task(domain_path, problem_path);
    FactSet start = task.init;
    if (!from_file.empty())
        start = detail::parse_fact_set_file(from_file, task);

    SearchResult result =
        astar(task, start, heuristic_from_name(heuristic_name));
    if (result.status == SearchResult::BudgetExceeded) {
        os << "node budget exceeded after " << result.expansions
           << " expansions\n";
        return kExitBudget;
    }
    if (!result.solved()) {
        os << "unsolvable\n";
        return kExitUnsolvable;
    }
    if (result.plan->operators.empty()) {
        os << "empty plan\n";
        os << format_plan_trace(task, start, *result.plan);
        return kExitOk;
    }
    os << format_plan_trace(task, start, *result.plan);
    return kExitOk;
}

inline int cmd_derive_options(const std::string &domain_path,
                              const std::string &problem_path,
                              std::ostream &os) {
    PlanningTask task = detail::load_task(domain_path, problem_path);
    auto options = derive_options(task);
    for (const auto &option : options) {
        os << "option " << option.id << "\n";
        if (option.is_goal_option()) {
            os << "  init: " << task.fact_set_str(task.goal) << "\n";
            os << "  term: <env goal states>\n";
            continue;
        }
        const GroundOperator &op = task.operators[option.op];
        os << "  init: " << task.fact_set_str(op.pre) << "\n";
        os << "  term: " << task.fact_set_str(set_union(op.prevail, op.add))
           << "\n";
        os << "  frame-prevail: " << task.fact_set_str(op.prevail) << "\n";
    }
    os << options.size() << " options (" << task.operators.size()
       << " operator options + goal)\n";
    return kExitOk;
}

namespace detail {

inline void write_csv(const std::filesystem::path &path, const TrainingLog &log,
                      const std::vector<std::string> &option_ids) {
    std::ofstream os(path);
    os.precision(10);
    os << "# planrl-train-log v1\n";
    os << "iteration,episodes,env_steps,success_rate,mean_episode_length";
    auto sanitize = [](std::string id) {
        for (auto &c : id)
            if (!std::isalnum((unsigned char)c))
                c = '_';
        return id;
    };
    for (const auto &id : option_ids)
        os << ",opt_" << sanitize(id) << "_success"
           << ",opt_" << sanitize(id) << "_length";
    os << "\n";
    for (size_t row = 0; row < log.evals.size(); ++row) {
        const EvalRecord &e = log.evals[row];
        os << e.iteration << "," << e.episode << "," << e.env_steps << ","
           << e.success_rate << "," << e.mean_episode_length;
        for (const auto &id : option_ids) {
            auto it = log.option_curves.find(id);
            if (it == log.option_curves.end() || row >= it->second.size() ||
                it->second[row].executions == 0) {
                os << ",,";
                continue;
            }
            const OptionWindowStats &w = it->second[row];
            os << "," << (double)w.terminations / w.executions << ","
               << (double)w.steps / w.executions;
        }
        os << "\n";
    }
}

inline void write_aggregate_csv(const std::filesystem::path &path,
                                const std::vector<TrainingLog> &logs) {
    std::ofstream os(path);
    os.precision(10);
    os << "# planrl-train-aggregate v1\n";
    os << "episodes,success_rate_mean,success_rate_min,success_rate_max,"
          "length_mean,length_min,length_max\n";
    size_t rows = 0;
    for (const auto &log : logs)
        rows = std::max(rows, log.evals.size());
    for (size_t row = 0; row < rows; ++row) {
        double sr_sum = 0, sr_min = 1e99, sr_max = -1e99;
        double len_sum = 0, len_min = 1e99, len_max = -1e99;
        long episodes = 0;
        int n = 0;
        for (const auto &log : logs) {
            if (row >= log.evals.size())
                continue;
            const EvalRecord &e = log.evals[row];
            episodes = std::max<long>(episodes, e.episode);
            sr_sum += e.success_rate;
            sr_min = std::min(sr_min, e.success_rate);
            sr_max = std::max(sr_max, e.success_rate);
            len_sum += e.mean_episode_length;
            len_min = std::min(len_min, e.mean_episode_length);
            len_max = std::max(len_max, e.mean_episode_length);
            ++n;
        }
        os << episodes << "," << sr_sum / n << "," << sr_min << "," << sr_max
           << "," << len_sum / n << "," << len_min << "," << len_max << "\n";
    }
}

inline void save_checkpoint(const std::filesystem::path &path,
                            const Trainer &trainer,
                            const AnnotatedTask &annotated,
                            Algorithm algorithm) {
    std::ofstream os(path);
    os << "# planrl-checkpoint v1 algorithm=" << algorithm_name(algorithm)
       << "\n";
    if (algorithm == Algorithm::HplanQPerOption) {
        for (const auto &[index, table] : trainer.registry().all_tables()) {
            os << "option " << annotated.option(index).id << "\n";
            table->save(os);
            os << "end\n";
        }
    } else {
        os << "shared\n";
        trainer.shared_table().save(os);
        os << "end\n";
    }
}

inline void load_checkpoint(const std::filesystem::path &path, Trainer &trainer,
                            const AnnotatedTask &annotated,
                            Algorithm algorithm, int num_actions,
                            double default_q) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot open checkpoint " +
                                 path.string());
    std::string line;
    std::getline(is, line); // file header
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::string option_id;
        if (line.rfind("option ", 0) == 0)
            option_id = line.substr(7);
        else if (line != "shared")
            throw std::runtime_error("bad checkpoint block: " + line);
        std::ostringstream block;
        while (std::getline(is, line) && line != "end")
            block << line << "\n";
        std::istringstream block_in(block.str());
        QTable table = QTable::load(block_in);
        if (option_id.empty()) {
            trainer.shared_table() = std::move(table);
        } else {
            int index = annotated.find_option(option_id);
            if (index < 0)
                throw std::runtime_error("checkpoint option " + option_id +
                                         " missing from the task");
            trainer.registry().table(index, num_actions, default_q) =
                std::move(table);
        }
    }
    (void)algorithm;
}

} // namespace detail

struct TrainOverrides {
    std::vector<uint32_t> seeds;
    std::string algorithm;
    std::string heuristic;
    std::string resume_checkpoint; // preload every seed's tables
};

inline int cmd_train(const std::string &config_path,
                     const TrainOverrides &overrides, std::ostream &os) {
    RunConfig cfg = load_run_config(config_path);
    if (!overrides.seeds.empty())
        cfg.seeds = overrides.seeds;
    if (!overrides.algorithm.empty())
        cfg.algorithm = algorithm_from_name(overrides.algorithm);
    if (!overrides.heuristic.empty())
        cfg.train.heuristic = heuristic_from_name(overrides.heuristic);

    PlanningTask task = detail::load_task(cfg.domain_path, cfg.problem_path);
    EnvSpec spec = cfg.make_env_spec();
    std::filesystem::path out = detail::output_root(cfg);
    std::string prefix = detail::algorithm_name(cfg.algorithm);

    std::vector<std::string> option_ids;
    for (const auto &option : derive_options(task))
        option_ids.push_back(option.id);
    std::sort(option_ids.begin(), option_ids.end());

    // Seeds run in parallel worker threads; each owns its env, trainer and
    // output files. Aggregation is a final sequential pass.
    std::vector<TrainingLog> logs(cfg.seeds.size());
    std::vector<std::string> summaries(cfg.seeds.size());
    std::vector<std::exception_ptr> errors(cfg.seeds.size());
    auto run_seed = [&](size_t i) {
        try {
            uint32_t seed = cfg.seeds[i];
            GridEnv env(spec);
            AnnotatedTask annotated(env, task);
            TrainConfig train_cfg = cfg.train;
            train_cfg.seed = seed;
            Trainer trainer(env, annotated, cfg.algorithm, train_cfg);
            if (!overrides.resume_checkpoint.empty())
                detail::load_checkpoint(overrides.resume_checkpoint, trainer,
                                        annotated, cfg.algorithm,
                                        env.num_actions(),
                                        cfg.train.learner.default_value);
            TrainingLog log = trainer.train();
            auto csv = out / (prefix + "-seed" + std::to_string(seed) + ".csv");
            detail::write_csv(csv, log, option_ids);
            auto ckpt = out / (prefix + "-seed" + std::to_string(seed) +
                               ".qtables.txt");
            detail::save_checkpoint(ckpt, trainer, annotated, cfg.algorithm);
            std::ostringstream line;
            line << "seed " << seed << ": episodes=" << log.episodes.size()
                 << " env_steps=" << log.total_env_steps << " final_success="
                 << (log.evals.empty() ? 0.0 : log.evals.back().success_rate)
                 << " -> " << csv.string() << "\n";
            summaries[i] = line.str();
            logs[i] = std::move(log);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    size_t workers = std::max<size_t>(
        1, std::min<size_t>(cfg.seeds.size(),
                            std::thread::hardware_concurrency()));
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < cfg.seeds.size();
                 i = next.fetch_add(1))
                run_seed(i);
        });
    for (auto &t : pool)
        t.join();
    for (auto &error : errors)
        if (error)
            std::rethrow_exception(error);
    for (const auto &summary : summaries)
        os << summary;

    auto aggregate = out / (prefix + "-aggregate.csv");
    detail::write_aggregate_csv(aggregate, logs);
    os << "aggregate -> " << aggregate.string() << "\n";
    return kExitOk;
}

inline int cmd_evaluate(const std::string &config_path,
                        const std::string &checkpoint_path, int episodes,
                        std::ostream &os) {
    RunConfig cfg = load_run_config(config_path);
    PlanningTask task = detail::load_task(cfg.domain_path, cfg.problem_path);
    EnvSpec spec = cfg.make_env_spec();
    GridEnv env(spec);
    AnnotatedTask annotated(env, task);
    Trainer trainer(env, annotated, cfg.algorithm, cfg.train);
    detail::load_checkpoint(checkpoint_path, trainer, annotated, cfg.algorithm,
                            env.num_actions(), cfg.train.learner.default_value);
    EvalResult result =
        trainer.evaluate(episodes > 0 ? episodes : cfg.train.eval_episodes);
    os << "success_rate: " << result.success_rate << "\n";
    os << "mean_episode_length: " << result.mean_episode_length << "\n";
    if (result.missing_option_tables > 0)
        os << "episodes failed for missing option tables: "
           << result.missing_option_tables << "\n";
    return kExitOk;
}

inline int cmd_verify(const std::string &config_path, std::ostream &os) {
    RunConfig cfg = load_run_config(config_path);
    PlanningTask task = detail::load_task(cfg.domain_path, cfg.problem_path);
    EnvSpec spec = cfg.make_env_spec();
    GridEnv env(spec);
    AnnotatedTask annotated(env, task);
    bool all_ok = true;
    auto report_line = [&](const std::string &name, bool ok,
                           const std::string &info) {
        os << (ok ? "[PASS] " : "[FAIL] ") << name;
        if (!info.empty())
            os << ": " << info;
        os << "\n";
        all_ok &= ok;
    };

    GridState reset = env.reset(cfg.seeds.empty() ? 0 : cfg.seeds[0]);

    // Abstraction soundness: env transitions vs planning operators.
    ProperReport proper = annotated.is_proper(reset);
    report_line("proper-abstraction", proper.proper,
                proper.proper
                    ? std::to_string(proper.transitions_checked) +
                          " transitions over " +
                          std::to_string(proper.states_checked) + " states"
                    : proper.witness->detail);

    // Option derivation matches the grounding.
    report_line("option-count",
                annotated.options().size() == task.operators.size() + 1,
                std::to_string(annotated.options().size()) + " options for " +
                    std::to_string(task.operators.size()) + " operators");

    // Frame preservation and its consequence over the scripted policies.
    EnumeratedMdp mdp = enumerate_mdp(env, reset);
    ScriptedOptionPolicy policy(annotated, mdp);
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, policy);
    auto frames = is_frame_preserving(annotated, graph);
    report_line("frame-preservation", frames.preserved,
                frames.preserved
                    ? std::to_string(frames.edges_checked) + " option edges"
                    : "frames differ across an edge of option " +
                          annotated.option(frames.witness->edge.option).id);

    TransitionGraph planning_graph = build_transition_graph(task);
    auto bisim = check_bisimulation(planning_graph, graph, annotated);
    report_line("bisimulation", bisim.holds,
                bisim.holds ? std::to_string(bisim.edges_checked) + " edges"
                            : bisim.witness->reason);
    report_line("frame-preservation-implies-bisimulation",
                !frames.preserved || bisim.holds, "");

    // Nested partial frames shrink the restricted space monotonically.
    {
        Rng rng(2027);
        int trials = 0;
        long attempts = 0;
        bool ok = true;
        while (trials < 100 && attempts++ < 100000) {
            const GridState &entry =
                mdp.states[rng.below((int)mdp.states.size())];
            int oi = rng.below((int)annotated.options().size());
            const OptionSpec &option = annotated.option(oi);
            if (option.is_goal_option() || !annotated.initiation(option, entry))
                continue;
            FrameSnapshot snap = annotated.context_and_frame(option, entry);
            std::vector<FactId> q_ids, p_ids;
            for (FactId f : snap.frame)
                if (rng.below(2))
                    q_ids.push_back(f);
            FactSet frame_q(std::move(q_ids));
            for (FactId f : frame_q)
                if (rng.below(2))
                    p_ids.push_back(f);
            FactSet frame_p(std::move(p_ids));
            ok &= check_frame_monotonicity(mdp, annotated, option, entry,
                                           frame_p, frame_q)
                      .holds;
            ++trials;
        }
        report_line("frame-monotonicity", ok,
                    trials > 0 ? std::to_string(trials) + " nested frame pairs"
                               : "vacuous, no startable operator option");
    }

    return all_ok ? kExitOk : kExitUnsolvable;
}

inline int run(int argc, char **argv) {
    CLI::App app{"planning-annotated reinforcement learning toolkit"};
    app.require_subcommand(1);

    std::string domain, problem, heuristic = "blind", from_file;
    std::string config_path, checkpoint_path, algorithm;
    std::vector<uint32_t> seeds;
    int episodes = 0;

    auto *parse = app.add_subcommand("parse", "ground a planning task");
    parse->add_option("domain", domain)->required();
    parse->add_option("problem", problem)->required();

    auto *plan = app.add_subcommand("plan", "search for a plan");
    plan->add_option("domain", domain)->required();
    plan->add_option("problem", problem)->required();
    plan->add_option("--heuristic", heuristic,
                     "blind | goal-count | hadd (default blind)");
    plan->add_option("--from", from_file, "fact-set file overriding init");

    auto *derive =
        app.add_subcommand("derive-options", "list the options of a task");
    derive->add_option("domain", domain)->required();
    derive->add_option("problem", problem)->required();

    auto *train = app.add_subcommand("train", "run the training loop");
    train->add_option("config", config_path)->required();
    train->add_option("--seed", seeds, "override the config's seed list");
    train->add_option("--algorithm", algorithm,
                      "hplanq-per-option | hplanq-shared | flat-q");
    std::string train_heuristic, resume;
    train->add_option("--heuristic", train_heuristic);
    train->add_option("--resume", resume, "checkpoint preloaded before training");

    auto *evaluate = app.add_subcommand("evaluate", "greedy evaluation");
    evaluate->add_option("config", config_path)->required();
    evaluate->add_option("checkpoint", checkpoint_path)->required();
    evaluate->add_option("--episodes", episodes);

    auto *verify =
        app.add_subcommand("verify", "brute-force structural checks");
    verify->add_option("config", config_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        if (parse->parsed())
            return cmd_parse(domain, problem, std::cout);
        if (plan->parsed())
            return cmd_plan(domain, problem, heuristic, from_file, std::cout);
        if (derive->parsed())
            return cmd_derive_options(domain, problem, std::cout);
        if (train->parsed())
            return cmd_train(config_path,
                             {seeds, algorithm, train_heuristic, resume},
                             std::cout);
        if (evaluate->parsed())
            return cmd_evaluate(config_path, checkpoint_path, episodes,
                                std::cout);
        if (verify->parsed())
            return cmd_verify(config_path, std::cout);
    } catch (const pddl::ParseError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

} // namespace planrl::cli
