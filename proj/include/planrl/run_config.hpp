#pragma once

#include "planrl/env.hpp"
#include "planrl/hrl.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace planrl {

/*
  Flat key = value run configuration with [env] / [planning] / [train] /
  [output] sections; one file fully specifies a run. Relative paths resolve
  against the config file's directory.
*/
struct RunConfig {
    // [env]
    std::string layout_path;
    RewardMode reward_mode = RewardMode::MinigridSparse;
    int horizon = 1024;
    SeedPolicy seed_policy = SeedPolicy::RandomizeCells;
    EnvMutation mutation = EnvMutation::None;
    bool literal_sparse = false;

    // [planning]
    std::string domain_path;
    std::string problem_path;

    // [train]
    Algorithm algorithm = Algorithm::HplanQPerOption;
    TrainConfig train;
    std::vector<uint32_t> seeds = {0};

    // [output]
    std::string output_dir = "out";

    EnvSpec make_env_spec() const {
        EnvSpec spec;
        std::ifstream in(layout_path);
        if (!in)
            throw std::runtime_error("cannot open layout " + layout_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        spec.layout = parse_layout(buf.str());
        spec.reward_mode = reward_mode;
        spec.horizon = horizon;
        spec.seed_policy = seed_policy;
        spec.mutation = mutation;
        spec.literal_sparse_formula = literal_sparse;
        return spec;
    }
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline RunConfig parse_run_config(const std::string &text,
                                  const std::string &base_dir = ".") {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;

    auto resolve = [&](const std::string &p) {
        std::filesystem::path path(p);
        if (path.is_absolute())
            return p;
        return (std::filesystem::path(base_dir) / path).string();
    };

    while (std::getline(in, line)) {
        ++line_no;
        auto comment = line.find('#');
        if (comment != std::string::npos)
            line = line.substr(0, comment);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos)
            continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected key = value");
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string()
                                          : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto bad = [&](const std::string &why) {
            return ConfigError("line " + std::to_string(line_no) + ": " + why);
        };

        if (section == "env") {
            if (key == "layout")
                cfg.layout_path = resolve(value);
            else if (key == "reward") {
                if (value == "minigrid-sparse")
                    cfg.reward_mode = RewardMode::MinigridSparse;
                else if (value == "step-cost")
                    cfg.reward_mode = RewardMode::StepCost;
                else
                    throw bad("unknown reward mode " + value);
            } else if (key == "horizon")
                cfg.horizon = std::stoi(value);
            else if (key == "seed_policy") {
                if (value == "cells")
                    cfg.seed_policy = SeedPolicy::RandomizeCells;
                else if (value == "rooms")
                    cfg.seed_policy = SeedPolicy::RandomizeRoomsAndCells;
                else
                    throw bad("unknown seed policy " + value);
            } else if (key == "mutation") {
                if (value == "none")
                    cfg.mutation = EnvMutation::None;
                else if (value == "phase-locked-doors")
                    cfg.mutation = EnvMutation::PhaseLockedDoors;
                else
                    throw bad("unknown mutation " + value);
            } else if (key == "literal_sparse")
                cfg.literal_sparse = value == "true";
            else
                throw bad("unknown env key " + key);
        } else if (section == "planning") {
            if (key == "domain")
                cfg.domain_path = resolve(value);
            else if (key == "problem")
                cfg.problem_path = resolve(value);
            else
                throw bad("unknown planning key " + key);
        } else if (section == "train") {
            if (key == "algorithm")
                cfg.algorithm = algorithm_from_name(value);
            else if (key == "iterations")
                cfg.train.iterations = std::stoi(value);
            else if (key == "rollout_steps")
                cfg.train.rollout_steps = std::stoi(value);
            else if (key == "option_step_cap")
                cfg.train.option_step_cap = std::stoi(value);
            else if (key == "replay_passes")
                cfg.train.replay_passes = std::stoi(value);
            else if (key == "alpha")
                cfg.train.learner.alpha = std::stod(value);
            else if (key == "gamma")
                cfg.train.learner.gamma = std::stod(value);
            else if (key == "default_q")
                cfg.train.learner.default_value = std::stod(value);
            else if (key == "epsilon_initial")
                cfg.train.learner.epsilon.initial = std::stod(value);
            else if (key == "epsilon_final")
                cfg.train.learner.epsilon.final_value = std::stod(value);
            else if (key == "epsilon_decay_fraction")
                cfg.train.learner.epsilon.decay_fraction = std::stod(value);
            else if (key == "c1")
                cfg.train.intrinsic.frame_violation_penalty = std::stod(value);
            else if (key == "c2")
                cfg.train.intrinsic.step_penalty = std::stod(value);
            else if (key == "termination_bonus")
                cfg.train.intrinsic.termination_bonus = std::stod(value);
            else if (key == "mix_extrinsic")
                cfg.train.mix_extrinsic_into_options = value == "true";
            else if (key == "eval_every_episodes")
                cfg.train.eval_every_episodes = std::stoi(value);
            else if (key == "eval_episodes")
                cfg.train.eval_episodes = std::stoi(value);
            else if (key == "max_episodes")
                cfg.train.max_episodes = std::stoi(value);
            else if (key == "stop_at_success")
                cfg.train.stop_at_success = std::stod(value);
            else if (key == "heuristic")
                cfg.train.heuristic = heuristic_from_name(value);
            else if (key == "seeds") {
                cfg.seeds.clear();
                std::istringstream vs(value);
                uint32_t seed;
                while (vs >> seed)
                    cfg.seeds.push_back(seed);
                if (cfg.seeds.empty())
                    throw bad("seeds needs at least one value");
            } else
                throw bad("unknown train key " + key);
        } else if (section == "output") {
            if (key == "dir")
                cfg.output_dir = value;
            else
                throw bad("unknown output key " + key);
        } else {
            throw bad("key outside any known section: " + key);
        }
    }
    if (cfg.layout_path.empty())
        throw ConfigError("missing [env] layout");
    if (cfg.domain_path.empty() || cfg.problem_path.empty())
        throw ConfigError("missing [planning] domain/problem");
    return cfg;
}

inline RunConfig load_run_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(
        buf.str(), std::filesystem::path(path).parent_path().string());
}

} // namespace planrl
