#include "support.hpp"

#include "ciplan/approx_dp.hpp"
#include "ciplan/compression.hpp"
#include "ciplan/random_model.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace ciplan;
using ciplan::testing::enumerate_trajectories;
using ciplan::testing::load_fixture;

namespace {

std::vector<DecPomdpModel> models() {
    std::vector<DecPomdpModel> out{load_fixture("coin2"), load_fixture("peek2")};
    for (auto seed : ciplan::testing::model_seeds()) out.push_back(random_model(seed));
    return out;
}

std::size_t label_count(const FcsTree& tree, const PrivateCompression& pc) {
    std::size_t total = 0;
    for (const auto& a : pc.alphabet(tree)) total += a.size();
    return total;
}

} // namespace

TEST(Compression, TotalVariation) {
    EXPECT_DOUBLE_EQ(tv_distance({1, 0}, {0, 1}), 1.0);
    EXPECT_DOUBLE_EQ(tv_distance({0.5, 0.5}, {0.5, 0.5}), 0.0);
    EXPECT_NEAR(tv_distance({0.2, 0.3, 0.5}, {0.3, 0.3, 0.4}), 0.1, 1e-15);
    EXPECT_THROW(tv_distance({1}, {0.5, 0.5}), DomainError);
}

TEST(Compression, ExactPrivateIsLossless) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        auto pc = build_exact_private(tree);
        EXPECT_TRUE(check_recursive(tree, pc).pass) << m.name();
        auto params = measure_private(tree, pc);
        EXPECT_LE(params.eps_p, 1e-9) << m.name();
        EXPECT_LE(params.delta_p, 1e-9) << m.name();
        EXPECT_LE(label_count(tree, pc), label_count(tree, identity_private(tree)));
        EXPECT_NEAR(solve_fcs_asps(tree, pc).objective, solve_fcs_fps(tree).objective, 1e-9) << m.name();
    }
}

TEST(Compression, ConstructedCompressionsAreRecursive) {
    std::mt19937_64 rng(5);
    for (const auto& m : models()) {
        FcsTree tree(m);
        for (const auto& pc : {identity_private(tree), constant_private(tree), build_greedy(tree, 0.2, 0.2),
                               random_private(tree, rng, 2)}) {
            auto rec = check_recursive(tree, pc);
            EXPECT_TRUE(rec.pass) << m.name() << " " << pc.name << " " << rec.to_json().dump();
            auto lt = build_label_tree(tree, pc);
            auto cc = random_common(tree, pc, lt, rng, 2);
            EXPECT_TRUE(check_recursive(tree, pc, lt, cc).pass) << m.name() << " " << pc.name;
            EXPECT_TRUE(check_recursive(tree, pc, lt, bcs_common(tree, pc, lt)).pass);
        }
    }
}

TEST(Compression, BrokenUpdateIsReported) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    auto pc = constant_private(tree);
    // split one history of a t=2 node off: the constant parent label can no longer predict it
    int id = tree.level(2).front();
    pc.labels[id][0][0] = 7;
    derive_private_updates(tree, pc);
    auto rec = check_recursive(tree, pc);
    EXPECT_FALSE(rec.pass);
    ASSERT_FALSE(rec.violations.empty());
    EXPECT_NE(rec.violations.front().edge.find(tree.node(id).key()), std::string::npos) << rec.violations.front().edge;
    EXPECT_THROW(measure_private(tree, pc), CompressionError);
    EXPECT_THROW(solve_fcs_asps(tree, pc), CompressionError);
}

TEST(Compression, MergedHistoriesMatchHandMixture) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    auto pc = identity_private(tree);
    int id = tree.level(2).front();
    for (auto& z : pc.labels[id][0]) z = 0;
    derive_private_updates(tree, pc);
    ASSERT_TRUE(check_recursive(tree, pc).pass);

    // oracle: E[r | h, a] from raw trajectories, mixed over agent 1's histories per agent 2 history
    auto traj = enumerate_trajectories(tree, id);
    std::map<std::vector<std::string>, std::pair<double, std::vector<double>>> per_hist;
    for (const auto& [k, p] : traj.joint) {
        auto& [mass, r] = per_hist[k.second];
        if (r.empty()) r.assign(m.num_joint_actions(), 0.0);
        mass += p;
        for (int a = 0; a < m.num_joint_actions(); ++a) r[a] += p * m.reward(k.first, a);
    }
    std::map<std::string, std::pair<double, std::vector<double>>> mix;
    for (const auto& [h, mr] : per_hist) {
        auto& [mass, r] = mix[h[1]];
        if (r.empty()) r.assign(m.num_joint_actions(), 0.0);
        mass += mr.first;
        for (int a = 0; a < m.num_joint_actions(); ++a) r[a] += mr.second[a];
    }
    double sup = 0;
    for (const auto& [h, mr] : per_hist)
        for (int a = 0; a < m.num_joint_actions(); ++a) {
            const auto& [mm, mrr] = mix[h[1]];
            sup = std::max(sup, std::abs(mr.second[a] / mr.first - mrr[a] / mm));
        }
    ASSERT_GT(sup, 0.0);
    auto params = measure_private(tree, pc);
    EXPECT_NEAR(params.eps_p, 4 * sup, 1e-9);
    EXPECT_NEAR(params.delta_p, 0.0, 1e-12);
    EXPECT_EQ(params.eps_p_witness.node, id);
}

TEST(Compression, MergedNodesMatchHandMixture) {
    // coin2 t=2 nodes after (stay, stay) and (stay, flip) have P(heads) 0.34 and 0.62;
    // r(heads, a) - r(tails, a) = 1 for every a, so each sits 0.14 from their even mixture.
    DecPomdpModel m = load_fixture("coin2");
    FcsTree tree(m);
    auto pc = identity_private(tree);
    auto lt = build_label_tree(tree, pc);
    auto cc = identity_common(tree, pc, lt);
    std::map<std::string, int> by_key;
    for (int id = 0; id < tree.size(); ++id) by_key[tree.node(id).key()] = id;
    cc.labels[by_key.at("0,1,0")] = cc.labels[by_key.at("0,0,0")];
    derive_common_updates(tree, pc, lt, cc);
    ASSERT_TRUE(check_recursive(tree, pc, lt, cc).pass);
    EXPECT_NEAR(lt.mu[by_key.at("0,0,0")], 0.25, 1e-15);
    auto params = measure_common(tree, pc, lt, cc);
    EXPECT_NEAR(params.eps_c, 0.14, 1e-12);
    EXPECT_EQ(params.delta_c, 0.0);
    auto d = common_discrepancy(tree, pc, lt, cc, by_key.at("0,1,0"), 0);
    EXPECT_NEAR(d.first, 0.14, 1e-12);
}

TEST(Compression, BeliefCommonCompressionIsLossless) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        auto pc = build_exact_private(tree);
        auto lt = build_label_tree(tree, pc);
        auto cc = bcs_common(tree, pc, lt);
        auto params = measure_common(tree, pc, lt, cc);
        EXPECT_LE(params.eps_c, 1e-9) << m.name();
        EXPECT_LE(params.delta_c, 1e-9) << m.name();
    }
}

TEST(Compression, RefinementKeepsRecursion) {
    std::mt19937_64 rng(17);
    for (auto seed : ciplan::testing::model_seeds()) {
        DecPomdpModel m = random_model(seed);
        FcsTree tree(m);
        auto pc = constant_private(tree);
        for (int step = 0; step < 4; ++step) {
            std::size_t before = label_count(tree, pc);
            if (!refine_private(tree, pc, rng)) break;
            EXPECT_GT(label_count(tree, pc), before);
            ASSERT_TRUE(check_recursive(tree, pc).pass) << m.name() << " step " << step;
        }
    }
}

TEST(Compression, RefinementCanRaiseMeasuredRewardError) {
    // Agent 1 sees the state; states carry reward 0, 1, 1 with prior 0.98, 0.01, 0.01.
    // One block: mixture 0.02, worst history 0.98 away. Splitting off the third
    // observation leaves {0, 1} with mixture 1/99, so the second history sits 98/99 away.
    nlohmann::json doc{
        {"name", "skew3"},
        {"num_agents", 2},
        {"states", {"a", "b", "c"}},
        {"actions", {{"x"}, {"x"}}},
        {"common_obs", {"none"}},
        {"private_obs", {{"a", "b", "c"}, {"none"}}},
        {"transition", {{{{1.0, 0.0, 0.0}}}, {{{0.0, 1.0, 0.0}}}, {{{0.0, 0.0, 1.0}}}}},
        {"observation", {{{{1.0}, {0.0}, {0.0}}}, {{{0.0}, {1.0}, {0.0}}}, {{{0.0}, {0.0}, {1.0}}}}},
        {"reward", {{{0.0}}, {{1.0}}, {{1.0}}}},
        {"initial", {0.98, 0.01, 0.01}},
        {"horizon", 1},
        {"reward_bound", 1.0}};
    DecPomdpModel m = load_model(doc.dump());
    FcsTree tree(m);
    auto coarse = constant_private(tree);
    EXPECT_NEAR(measure_private(tree, coarse).eps_p, 4 * 0.98, 1e-12);

    auto fine = coarse;
    int root = tree.roots().front();
    const auto& dom = tree.node(root).domain[0];
    ASSERT_EQ(dom.size(), 3u);
    for (std::size_t i = 0; i < dom.size(); ++i) fine.labels[root][0][i] = dom[i].str() == "2" ? 1 : 0;
    fine.update.clear();
    derive_private_updates(tree, fine);
    ASSERT_TRUE(check_recursive(tree, fine).pass);
    EXPECT_NEAR(measure_private(tree, fine).eps_p, 4 * 98.0 / 99.0, 1e-12);
}

TEST(Compression, GreedyWithZeroToleranceIsExact) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        auto greedy = build_greedy(tree, 0, 0);
        auto exact = build_exact_private(tree);
        EXPECT_EQ(greedy.labels, exact.labels) << m.name();
        auto loose = build_greedy(tree, 10, 1);
        EXPECT_LE(label_count(tree, loose), label_count(tree, greedy));
    }
}

TEST(Compression, DocumentsRoundTrip) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    auto pc = build_greedy(tree, 0.3, 0.3);
    auto lt = build_label_tree(tree, pc);
    std::mt19937_64 rng(3);
    auto cc = random_common(tree, pc, lt, rng, 3);
    auto pdoc = private_to_json(tree, pc);
    auto cdoc = common_to_json(tree, cc);
    FcsTree other(m);
    auto pc2 = private_from_json(other, nlohmann::json::parse(pdoc.dump()));
    auto cc2 = common_from_json(other, nlohmann::json::parse(cdoc.dump()));
    EXPECT_EQ(pc2.labels, pc.labels);
    EXPECT_EQ(pc2.update, pc.update);
    EXPECT_EQ(cc2.labels, cc.labels);
    EXPECT_EQ(cc2.update, cc.update);
    EXPECT_EQ(private_to_json(other, pc2).dump(), pdoc.dump());
}

TEST(Compression, DocumentErrorsNameTheirLocus) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    auto doc = private_to_json(tree, identity_private(tree));
    auto bad = doc;
    bad["agents"][0]["times"][0]["labels"][0]["fcs"] = "9,9";
    try {
        private_from_json(tree, bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("9,9"), std::string::npos) << e.what();
    }
    auto missing = doc;
    missing["agents"][1]["times"][1]["labels"].erase(0);
    EXPECT_THROW(private_from_json(tree, missing), CompressionError);
    auto wrong = doc;
    wrong["kind"] = "common";
    EXPECT_THROW(private_from_json(tree, wrong), ParseError);
}
