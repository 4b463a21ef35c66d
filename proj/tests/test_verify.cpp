#include "planrl/verify.hpp"

#include "planrl/ground.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <set>
#include <unordered_set>

using namespace planrl;
using testsupport::data_file;

namespace {

struct Fixture {
    GridEnv env;
    PlanningTask task;

    Fixture(const std::string &layout_file, const std::string &domain,
            const std::string &problem,
            RewardMode mode = RewardMode::MinigridSparse)
        : env(make_spec(layout_file, mode)),
          task(load(domain, problem)) {}

    static EnvSpec make_spec(const std::string &layout_file, RewardMode mode) {
        EnvSpec spec;
        spec.layout = parse_layout(data_file(layout_file));
        spec.reward_mode = mode;
        spec.horizon = 256;
        return spec;
    }

    static PlanningTask load(const std::string &domain,
                             const std::string &problem) {
        auto d = pddl::parse_domain(data_file(domain));
        auto p = pddl::parse_problem(data_file(problem));
        return ground(d, p);
    }
};

// Independent reachability oracle: BFS over raw env steps, keeping only
// successors whose image still contains every frame fact.
std::set<uint64_t> filtered_reach_oracle(const GridEnv &env,
                                         const StateMapper &mapper,
                                         const GridState &entry,
                                         const FactSet &frame,
                                         const AnnotatedTask &annotated,
                                         const OptionSpec &option) {
    std::set<uint64_t> seen;
    std::deque<GridState> queue;
    GridState root = entry;
    root.step_count = 0;
    seen.insert(root.encode());
    queue.push_back(root);
    while (!queue.empty()) {
        GridState s = queue.front();
        queue.pop_front();
        if (env.is_goal(s) || annotated.termination(option, s))
            continue;
        for (int a = 0; a < env.num_actions(); ++a) {
            GridState t = env.step(s, a).state;
            t.step_count = 0;
            if (!mapper.all_hold(frame, t))
                continue;
            if (seen.insert(t.encode()).second)
                queue.push_back(t);
        }
    }
    return seen;
}

} // namespace

TEST(RestrictToFrame, LockedFourRoomsMoveOption) {
    Fixture f("layouts/locked-2x2.layout", "pddl/mazerooms-domain.pddl",
              "pddl/locked-2x2.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState entry = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, entry);

    const OptionSpec &move = annotated.option(
        annotated.find_option("(move-room d-yellow-0-0-1-0 r-0-0 r-1-0)"));
    ASSERT_TRUE(annotated.initiation(move, entry));
    FrameSnapshot snap = annotated.context_and_frame(move, entry);

    MdpModel restricted =
        restrict_to_frame(mdp, annotated, move, entry, snap.frame);
    std::vector<int> reach = reachable_states(restricted);

    // Oracle comparison.
    auto oracle = filtered_reach_oracle(f.env, annotated.mapper(), entry,
                                        snap.frame, annotated, move);
    EXPECT_EQ(reach.size(), oracle.size());

    const GridLayout &lo = f.env.layout();
    int locked_door = 2; // d-yellow-1-0-1-1 is the third door entry
    ASSERT_EQ(lo.doors[locked_door].name, "d-yellow-1-0-1-1");
    bool saw_r01 = false;
    for (int s : reach) {
        const GridState &state = mdp.states[s];
        // Key and door context is frozen along surviving transitions.
        EXPECT_EQ(state.carried_key, -1);
        EXPECT_EQ(f.env.room_of(state.key_cells[0]), lo.find_room("r-1-0"));
        EXPECT_TRUE(state.locked_mask >> locked_door & 1);
        int room = f.env.room_of(state.agent_cell);
        EXPECT_NE(room, lo.find_room("r-1-1")); // behind the locked door
        saw_r01 |= room == lo.find_room("r-0-1");
    }
    // Movement through unlocked doors keeps every frame fact, so the side
    // room stays reachable under the membership reading of the constraint.
    EXPECT_TRUE(saw_r01);
    // Frame-violating states lose even their self-loops and are flagged,
    // but none of them is reachable from the entry.
    for (int s : reach)
        EXPECT_FALSE(restricted.dead_end[s]);
}

TEST(RestrictToFrame, EmptyFrameIsIdentity) {
    Fixture f("layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState entry = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, entry);
    const OptionSpec &pickup =
        annotated.option(annotated.find_option("(pickup k-yellow-0 r-0-0)"));

    MdpModel restricted =
        restrict_to_frame(mdp, annotated, pickup, entry, FactSet{});
    for (int s = 0; s < restricted.num_states; ++s) {
        if (restricted.goal[s])
            continue;
        for (int a = 0; a < restricted.num_actions; ++a)
            EXPECT_EQ(restricted.transitions[restricted.row(s, a)].size(),
                      mdp.model.transitions[mdp.model.row(s, a)].size());
    }
}

TEST(RestrictToFrame, EntryViolatingFrameRejected) {
    Fixture f("layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState entry = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, entry);
    const OptionSpec &pickup =
        annotated.option(annotated.find_option("(pickup k-yellow-0 r-0-0)"));
    FactSet unlocked = FactSet{
        f.task.require_fact({"unlocked", {"d-yellow-0-0-1-0"}})};
    EXPECT_THROW(restrict_to_frame(mdp, annotated, pickup, entry, unlocked),
                 std::invalid_argument);
}

TEST(FrameMonotonicity, EmptyVersusFullIsStrictOnDoorKeyMove) {
    Fixture f("layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState entry = f.env.reset(0);
    entry.carried_key = 0;
    entry.key_cells[0] = -1;
    entry.locked_mask = 0;
    EnumeratedMdp mdp = enumerate_mdp(f.env, f.env.reset(0));

    const OptionSpec &move = annotated.option(
        annotated.find_option("(move-room d-yellow-0-0-1-0 r-0-0 r-1-0)"));
    ASSERT_TRUE(annotated.initiation(move, entry));
    FrameSnapshot snap = annotated.context_and_frame(move, entry);

    auto report = check_frame_monotonicity(mdp, annotated, move, entry,
                                           FactSet{}, snap.frame);
    EXPECT_TRUE(report.holds);
    EXPECT_LT(report.reachable_large_frame, report.reachable_small_frame);
}

TEST(FrameMonotonicity, EqualFramesGiveEqualSets) {
    Fixture f("layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState entry = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, entry);
    const OptionSpec &pickup =
        annotated.option(annotated.find_option("(pickup k-yellow-0 r-0-0)"));
    FrameSnapshot snap = annotated.context_and_frame(pickup, entry);
    auto report = check_frame_monotonicity(mdp, annotated, pickup, entry,
                                           snap.frame, snap.frame);
    EXPECT_TRUE(report.holds);
    EXPECT_EQ(report.reachable_small_frame, report.reachable_large_frame);
}

TEST(FrameMonotonicity, RandomNestedPairs) {
    Fixture f("layouts/locked-2x2.layout", "pddl/mazerooms-domain.pddl",
              "pddl/locked-2x2.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    Rng rng(2024);
    int done = 0;
    while (done < 100) {
        const GridState &entry = mdp.states[rng.below((int)mdp.states.size())];
        int oi = rng.below((int)annotated.options().size());
        const OptionSpec &option = annotated.option(oi);
        if (option.is_goal_option() || !annotated.initiation(option, entry))
            continue;
        FrameSnapshot snap = annotated.context_and_frame(option, entry);
        std::vector<FactId> q_ids, p_ids;
        for (FactId fct : snap.frame)
            if (rng.below(2))
                q_ids.push_back(fct);
        FactSet frame_q(std::move(q_ids));
        for (FactId fct : frame_q)
            if (rng.below(2))
                p_ids.push_back(fct);
        FactSet frame_p(std::move(p_ids));
        auto report =
            check_frame_monotonicity(mdp, annotated, option, entry, frame_p, frame_q);
        EXPECT_TRUE(report.holds);
        ++done;
    }
}

TEST(ValueIteration, ThreeStateChainClosedForm) {
    // start -> adjacent -> goal, reward 1 on the goal-entering step.
    MdpModel m;
    m.resize(3, 1);
    m.initial_state = 0;
    m.goal[2] = 1;
    m.transitions[m.row(0, 0)] = {{1, 1.0}};
    m.transitions[m.row(1, 0)] = {{2, 1.0}};
    m.reward[m.row(1, 0)] = 1.0;
    m.transitions[m.row(2, 0)] = {{2, 1.0}};
    auto result = value_iteration(m, 0.9, 1e-12);
    ASSERT_TRUE(result.converged);
    EXPECT_NEAR(result.values[1], 1.0, 1e-9);
    EXPECT_NEAR(result.values[0], 0.9, 1e-9);
}

TEST(ValueIteration, GammaZeroGivesMaxImmediateReward) {
    MdpModel m;
    m.resize(2, 2);
    m.goal[1] = 1;
    m.transitions[m.row(0, 0)] = {{0, 1.0}};
    m.reward[m.row(0, 0)] = 0.25;
    m.transitions[m.row(0, 1)] = {{1, 1.0}};
    m.reward[m.row(0, 1)] = 0.125;
    m.transitions[m.row(1, 0)] = {{1, 1.0}};
    m.transitions[m.row(1, 1)] = {{1, 1.0}};
    auto result = value_iteration(m, 0.0, 1e-12);
    ASSERT_TRUE(result.converged);
    EXPECT_DOUBLE_EQ(result.values[0], 0.25);
}

TEST(ValueIteration, DeadEndStatesPinnedToZero) {
    MdpModel m;
    m.resize(2, 1);
    m.goal[1] = 1;
    m.transitions[m.row(0, 0)] = {}; // restriction removed every outcome
    m.dead_end[0] = 1;
    auto result = value_iteration(m, 0.5);
    ASSERT_TRUE(result.converged);
    EXPECT_DOUBLE_EQ(result.values[0], 0.0);
}

TEST(ValueIteration, FourRoomsGreedyPathsMatchBfsDistances) {
    Fixture f("layouts/nrooms-4-20.layout", "pddl/rooms-domain.pddl",
              "pddl/rooms-0-20-4.pddl", RewardMode::StepCost);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    auto vi = value_iteration(mdp.model, 0.99, 1e-10);
    ASSERT_TRUE(vi.converged);

    // Independent BFS distances over the grid.
    std::vector<int> dist(mdp.states.size(), -1);
    std::deque<int> queue;
    for (size_t i = 0; i < mdp.states.size(); ++i)
        if (f.env.is_goal(mdp.states[i])) {
            dist[i] = 0;
            queue.push_back((int)i);
        }
    while (!queue.empty()) {
        int t = queue.front();
        queue.pop_front();
        for (size_t i = 0; i < mdp.states.size(); ++i) {
            if (dist[i] >= 0)
                continue;
            for (int a = 0; a < f.env.num_actions(); ++a)
                if (mdp.state_id(f.env.step(mdp.states[i], a).state) == t) {
                    dist[i] = dist[t] + 1;
                    queue.push_back((int)i);
                    break;
                }
        }
    }

    // Greedy rollout lengths equal BFS distances.
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        int s = rng.below((int)mdp.states.size());
        if (dist[s] < 0 || f.env.is_goal(mdp.states[s]))
            continue;
        int steps = 0;
        int cur = s;
        while (!f.env.is_goal(mdp.states[cur]) && steps < 2000) {
            int best_a = -1;
            double best_v = -1e99;
            for (int a = 0; a < mdp.model.num_actions; ++a) {
                const auto &row = mdp.model.transitions[mdp.model.row(cur, a)];
                double v = mdp.model.reward[mdp.model.row(cur, a)] +
                           0.99 * vi.values[row[0].target];
                if (v > best_v + 1e-12) {
                    best_v = v;
                    best_a = a;
                }
            }
            cur = mdp.model.transitions[mdp.model.row(cur, best_a)][0].target;
            ++steps;
        }
        EXPECT_EQ(steps, dist[s]);
    }
}

TEST(SmdpGraph, ScriptedDoorKeyProjectsOntoThePlan) {
    Fixture f("layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    ScriptedOptionPolicy policy(annotated, mdp);
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, policy);

    ASSERT_FALSE(graph.edges.empty());
    // Every edge: initiation at source, termination at target, and the
    // L-image follows the operator (checked in full by the bisim suite).
    const StateMapper &mapper = annotated.mapper();
    std::set<std::string> labels;
    for (const auto &edge : graph.edges) {
        const OptionSpec &option = annotated.option(edge.option);
        EXPECT_TRUE(annotated.initiation(option, graph.states[edge.source]));
        EXPECT_TRUE(annotated.termination(option, graph.states[edge.target]));
        EXPECT_GT(edge.steps, 0);
        labels.insert(option.id);
    }
    // The plan's three options all appear from the reset state's class.
    EXPECT_TRUE(labels.count("(pickup k-yellow-0 r-0-0)"));
    EXPECT_TRUE(labels.count("(unlock k-yellow-0 d-yellow-0-0-1-0 r-0-0 r-1-0)"));
    EXPECT_TRUE(labels.count("(move-room d-yellow-0-0-1-0 r-0-0 r-1-0)"));

    // Projected under L, the reset state's pickup edge lands on the trace's
    // state:1 image.
    int reset_id = mdp.state_id(reset);
    for (const auto &edge : graph.edges) {
        if (edge.source != reset_id)
            continue;
        if (annotated.option(edge.option).id != "(pickup k-yellow-0 r-0-0)")
            continue;
        FactSet image = mapper.to_facts(graph.states[edge.target]);
        EXPECT_TRUE(image.contains(f.task.require_fact({"carry", {"k-yellow-0"}})));
    }
}

TEST(SmdpGraph, IdlePoliciesGiveNoEdges) {
    Fixture f("layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    auto idle = [](int, const GridState &) { return MinigridAction::TurnLeft; };
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, idle);
    EXPECT_TRUE(graph.edges.empty()); // spinning never terminates an option
}

TEST(FramePreservation, ScriptedDoorKeyPreserves) {
    Fixture f("layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    ScriptedOptionPolicy policy(annotated, mdp);
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, policy);
    auto report = is_frame_preserving(annotated, graph);
    EXPECT_TRUE(report.preserved);
    EXPECT_GT(report.edges_checked, 0u);
}

TEST(FramePreservation, ExhaustiveNRoomsVacuouslyPreserves) {
    Fixture f("layouts/nrooms-4-20.layout", "pddl/rooms-domain.pddl",
              "pddl/rooms-0-20-4.pddl", RewardMode::StepCost);
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    SmdpBuildConfig cfg;
    cfg.exhaustive = true;
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, nullptr, cfg);
    EXPECT_FALSE(graph.edges.empty());
    auto report = is_frame_preserving(annotated, graph);
    EXPECT_TRUE(report.preserved);
}

TEST(FramePreservation, DroppingInsideMoveBreaksIt) {
    Fixture f("layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    ScriptedOptionPolicy scripted(annotated, mdp);
    // Mutant: while moving rooms with the key in hand, drop it first.
    auto mutant = [&](int oi, const GridState &s) {
        const OptionSpec &option = annotated.option(oi);
        if (!option.is_goal_option() && option.id.starts_with("(move-room") &&
            s.carried_key >= 0) {
            GridState dropped = f.env.step(s, MinigridAction::Drop).state;
            if (dropped.carried_key < 0)
                return (int)MinigridAction::Drop;
        }
        return scripted(oi, s);
    };
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, mutant);
    auto report = is_frame_preserving(annotated, graph);
    ASSERT_FALSE(report.preserved);
    ASSERT_TRUE(report.witness.has_value());
    EXPECT_NE(report.witness->source_frame, report.witness->target_frame);

    // The implication stays intact: the same graph also fails bisimulation.
    TransitionGraph planning_graph = build_transition_graph(f.task);
    auto bisim = check_bisimulation(planning_graph, graph, annotated);
    EXPECT_FALSE(bisim.holds);
}

TEST(Bisimulation, HoldsOnScriptedDoorKey) {
    Fixture f("layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    ScriptedOptionPolicy policy(annotated, mdp);
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, policy);
    TransitionGraph planning_graph = build_transition_graph(f.task);

    auto report = check_bisimulation(planning_graph, graph, annotated);
    EXPECT_TRUE(report.holds) << (report.witness ? report.witness->reason : "");
    EXPECT_GT(report.edges_checked, 0u);

    // The relation partitions states by their planning image.
    size_t total = 0;
    for (const auto &[image, members] : report.relation_classes) {
        total += members.size();
        for (int s : members)
            EXPECT_EQ(annotated.mapper().to_facts(graph.states[s]), image);
    }
    EXPECT_EQ(total, graph.states.size());
}

TEST(Bisimulation, HoldsOnExhaustiveNRooms) {
    Fixture f("layouts/nrooms-4-20.layout", "pddl/rooms-domain.pddl",
              "pddl/rooms-0-20-4.pddl", RewardMode::StepCost);
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    SmdpBuildConfig cfg;
    cfg.exhaustive = true;
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, nullptr, cfg);
    TransitionGraph planning_graph = build_transition_graph(f.task);
    auto report = check_bisimulation(planning_graph, graph, annotated);
    EXPECT_TRUE(report.holds) << (report.witness ? report.witness->reason : "");
}

TEST(Bisimulation, EmptyGraphsHold) {
    Fixture f("layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    TransitionGraph planning_graph = build_transition_graph(f.task);
    SmdpGraph empty;
    auto report = check_bisimulation(planning_graph, empty, annotated);
    EXPECT_TRUE(report.holds);
}

TEST(MutationHarness, ImplicationNeverFalsified) {
    Fixture f("layouts/doorkey-6x6.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    ScriptedOptionPolicy scripted(annotated, mdp);
    TransitionGraph planning_graph = build_transition_graph(f.task);

    Rng rng(99);
    int falsified = 0;
    for (int trial = 0; trial < 25; ++trial) {
        // Perturb the scripted policy at a random set of states.
        uint64_t salt = rng.next();
        auto mutated = [&, salt](int oi, const GridState &s) {
            uint64_t h = s.encode() * 0x9e3779b97f4a7c15ULL + salt + oi;
            if ((h >> 17 & 7) == 0)
                return (int)(h % f.env.num_actions());
            return scripted(oi, s);
        };
        SmdpGraph graph = smdp_transition_graph(annotated, mdp, mutated);
        auto frames = is_frame_preserving(annotated, graph);
        auto bisim = check_bisimulation(planning_graph, graph, annotated);
        if (frames.preserved && !bisim.holds)
            ++falsified;
    }
    EXPECT_EQ(falsified, 0);
}

TEST(SmdpValueIteration, DoorKeyReturnBelowFlatOptimum) {
    Fixture f("layouts/doorkey-8x8.layout", "pddl/mazerooms-domain.pddl",
              "pddl/doorkey-8x8.pddl");
    AnnotatedTask annotated(f.env, f.task);
    GridState reset = f.env.reset(0);
    EnumeratedMdp mdp = enumerate_mdp(f.env, reset);
    ScriptedOptionPolicy policy(annotated, mdp);
    SmdpGraph graph = smdp_transition_graph(annotated, mdp, policy);
    MdpModel smdp = build_smdp_model(annotated, mdp, graph, policy);

    auto flat = value_iteration(mdp.model, 0.99, 1e-10);
    auto option_level = value_iteration(smdp, 0.99, 1e-10);
    ASSERT_TRUE(flat.converged);
    ASSERT_TRUE(option_level.converged);

    int s0 = mdp.model.initial_state;
    EXPECT_GT(option_level.values[s0], 0.0);
    EXPECT_LE(option_level.values[s0], flat.values[s0] + 1e-9);
}
