#include "support.hpp"

#include "ciplan/exact_dp.hpp"
#include "ciplan/random_model.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

using namespace ciplan;
using ciplan::testing::load_fixture;
using ciplan::testing::trajectory_value;

namespace {

std::vector<DecPomdpModel> models() {
    std::vector<DecPomdpModel> out{load_fixture("coin2"), load_fixture("peek2")};
    for (auto seed : ciplan::testing::model_seeds()) out.push_back(random_model(seed));
    return out;
}

DecPomdpModel single(double reward) {
    ModelData d;
    d.states = {"s"};
    d.actions = {{"a"}};
    d.common_obs = {"c"};
    d.private_obs = {{"o"}};
    d.transition = {1.0};
    d.observation = {1.0};
    d.reward = {reward};
    d.initial = {1.0};
    d.horizon = 1;
    return DecPomdpModel(d);
}

} // namespace

TEST(ExactDp, SingleStepSingleAgent) {
    DecPomdpModel m = single(1.0);
    FcsTree tree(m);
    EXPECT_DOUBLE_EQ(solve_fcs_fps(tree).objective, 1.0);
    EXPECT_DOUBLE_EQ(brute_force_value(tree), 1.0);
}

TEST(ExactDp, ZeroRewardGivesZero) {
    ModelData d = load_fixture("peek2").data();
    std::fill(d.reward.begin(), d.reward.end(), 0.0);
    DecPomdpModel m(d);
    FcsTree tree(m);
    EXPECT_EQ(solve_fcs_fps(tree).objective, 0.0);
    EXPECT_EQ(brute_force_value(tree), 0.0);
}

TEST(ExactDp, Coin2HandValue) {
    // t=1: (stay, flip) earns 0.3*0.9 - 0.7*0.1 = 0.2 and moves heads to 0.62;
    // t=2: (stay, stay) then earns 0.62.
    DecPomdpModel m = load_fixture("coin2");
    FcsTree tree(m);
    auto sol = solve_fcs_fps(tree);
    EXPECT_NEAR(sol.objective, 0.82, 1e-12);
    EXPECT_EQ(count_policies(tree), 16);
}

TEST(ExactDp, MatchesBruteForce) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        auto sol = solve_fcs_fps(tree);
        EXPECT_NEAR(sol.objective, brute_force_value(tree), 1e-9) << m.name();
    }
}

TEST(ExactDp, PolicyEvaluationsAgree) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        auto sol = solve_fcs_fps(tree);
        auto backward = evaluate_policy(tree, sol.policy);
        double b = 0;
        for (int r : tree.roots()) b += tree.node(r).branch_prob * backward[r];
        EXPECT_NEAR(b, sol.objective, 1e-12) << m.name();
        EXPECT_NEAR(evaluate_policy_forward(tree, sol.policy), sol.objective, 1e-9) << m.name();
        EXPECT_NEAR(trajectory_value(tree, sol.policy.choice), sol.objective, 1e-9) << m.name();
    }
}

TEST(ExactDp, SupervisorQAtHorizonIsImmediateReward) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    auto sol = solve_fcs_fps(tree);
    for (int id : tree.level(m.horizon())) {
        const FcsNode& node = tree.node(id);
        for (const auto& f : node.fps)
            for (std::int64_t g = 0; g < node.space.size(); g += 7) {
                int a = joint_action(m, node.space.decode(g), f.hist);
                double hand = 0;
                for (int i = f.begin; i < f.end; ++i) hand += node.belief[i].prob / f.prob * m.reward(node.belief[i].state, a);
                EXPECT_NEAR(supervisor_q(tree, sol, id, f.hist, g), hand, 1e-12);
            }
    }
}

TEST(ExactDp, SupervisorExpectationIsCoordinatorQ) {
    for (const char* name : {"coin2", "peek2"}) {
        DecPomdpModel m = load_fixture(name);
        FcsTree tree(m);
        auto sol = solve_fcs_fps(tree);
        for (int id = 0; id < tree.size(); ++id) {
            const FcsNode& node = tree.node(id);
            for (std::int64_t g = 0; g < node.space.size(); ++g) {
                double mix = 0;
                for (const auto& f : node.fps) mix += f.prob * supervisor_q(tree, sol, id, f.hist, g);
                EXPECT_NEAR(mix, sol.q[id][g], 1e-9) << node.key() << " gamma " << g;
            }
        }
    }
}

TEST(ExactDp, RejectsInadmissibleHistory) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    auto sol = solve_fcs_fps(tree);
    EXPECT_THROW(supervisor_q(tree, sol, tree.roots().front(), {7, 7}, 0), DomainError);
}

TEST(ExactDp, BudgetIsEnforced) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    SolveOptions opts;
    opts.budget = 100;
    EXPECT_THROW(solve_fcs_fps(tree, opts), BudgetExceeded);
    FcsTree again(m);
    EXPECT_THROW(brute_force_value(again, 1000), BudgetExceeded);
}

TEST(ExactDp, ThreadCountDoesNotChangeValues) {
    DecPomdpModel m = load_fixture("peek2");
    SolveOptions opts;
    opts.keep_q = true;
    setenv("CIPLAN_THREADS", "1", 1);
    FcsTree a(m);
    auto sa = solve_fcs_fps(a, opts);
    setenv("CIPLAN_THREADS", "3", 1);
    FcsTree b(m);
    auto sb = solve_fcs_fps(b, opts);
    unsetenv("CIPLAN_THREADS");
    EXPECT_EQ(sa.objective, sb.objective);
    EXPECT_EQ(sa.q, sb.q);
    EXPECT_EQ(sa.policy.choice, sb.policy.choice);
}
