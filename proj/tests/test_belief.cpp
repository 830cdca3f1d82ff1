#include "support.hpp"

#include "ciplan/belief.hpp"
#include "ciplan/compression.hpp"
#include "ciplan/random_model.hpp"

#include <gtest/gtest.h>

using namespace ciplan;
using ciplan::testing::load_fixture;

namespace {

std::vector<DecPomdpModel> models() {
    std::vector<DecPomdpModel> out{load_fixture("coin2"), load_fixture("peek2")};
    for (auto seed : ciplan::testing::model_seeds()) out.push_back(random_model(seed));
    return out;
}

void expect_same(const BeliefState& a, const BeliefState& b, const std::string& where) {
    ASSERT_EQ(a.time, b.time) << where;
    ASSERT_EQ(a.domain, b.domain) << where;
    ASSERT_EQ(a.atoms.size(), b.atoms.size()) << where;
    for (std::size_t k = 0; k < a.atoms.size(); ++k) {
        EXPECT_EQ(a.atoms[k].state, b.atoms[k].state) << where;
        EXPECT_EQ(a.atoms[k].hist, b.atoms[k].hist) << where;
        EXPECT_NEAR(a.atoms[k].prob, b.atoms[k].prob, 1e-9) << where;
    }
}

} // namespace

TEST(Belief, BayesUpdateMatchesDirectComputation) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        tree.build_full();
        for (int id = 0; id < tree.size(); ++id) {
            const FcsNode& node = tree.node(id);
            if (node.time == m.horizon()) continue;
            BeliefState pi = compute_bcs(tree, id);
            for (std::int64_t g = 0; g < node.space.size(); ++g) {
                Prescription gamma = node.space.decode(g);
                auto dist = common_obs_distribution(m, pi, gamma);
                for (const auto& c : tree.children(id, g)) {
                    EXPECT_NEAR(dist[c.common_obs], c.prob, 1e-9);
                    expect_same(bayes_update(m, pi, gamma, c.common_obs), compute_bcs(tree, c.child),
                                m.name() + " " + tree.node(c.child).key());
                }
            }
        }
    }
}

TEST(Belief, UpdateRejectsImpossibleObservation) {
    DecPomdpModel m = load_fixture("coin2");
    FcsTree tree(m);
    tree.build_full();
    BeliefState pi = compute_bcs(tree, 0);
    EXPECT_THROW(bayes_update(m, pi, tree.node(0).space.decode(0), 1), DomainError);
}

TEST(Belief, FingerprintIgnoresRoundoff) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    BeliefState a = compute_bcs(tree, 0);
    BeliefState b = a;
    b.atoms[0].prob += 1e-13;
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
    EXPECT_EQ(a.digest(), b.digest());
}

TEST(Belief, BeliefDpMatchesFcsDp) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        double fcs = solve_fcs_fps(tree).objective;
        EXPECT_NEAR(solve_bcs_fps(m).objective, fcs, 1e-9) << m.name();
    }
}

TEST(Belief, IdentitySpiMapPassesAllConditions) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        SpiMap spi = identity_private(tree);
        auto report = check_spi(tree, spi);
        for (const char* id : {"SPI1", "SPI2", "SPI3", "SPI4"}) EXPECT_TRUE(report.get(id).pass) << m.name() << " " << id;
        EXPECT_NEAR(solve_bcs_spi(tree, spi).objective, solve_fcs_fps(tree).objective, 1e-9) << m.name();
    }
}

TEST(Belief, ExactPartitionSatisfiesSpi) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    SpiMap spi = build_exact_private(tree);
    auto report = check_spi(tree, spi);
    EXPECT_TRUE(report.pass()) << report.to_json().dump();
    EXPECT_NEAR(solve_bcs_spi(tree, spi).objective, solve_fcs_fps(tree).objective, 1e-9);
}

TEST(Belief, ConstantMapOnInformativeModelFailsAndIsRejected) {
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    SpiMap spi = constant_private(tree);
    auto report = check_spi(tree, spi);
    EXPECT_FALSE(report.pass());
    EXPECT_GT(report.get("SPI2").max_violation, 0.0);
    EXPECT_THROW(solve_bcs_spi(tree, spi), CompressionError);
}

TEST(Belief, SpiConditionsMatchHandEnumeration) {
    // Merge agent 1's two root histories under hint-left on peek2. By hand:
    // P(left | hint-left) = 0.6; with own obs right, P(left) = 0.06 / 0.22 = 3/11.
    // Under (left, left) the reward is 1{left}, so SPI2 = 0.6 - 3/11.
    DecPomdpModel m = load_fixture("peek2");
    FcsTree tree(m);
    SpiMap spi = identity_private(tree);
    int root = tree.roots().front();
    ASSERT_EQ(tree.node(root).common_obs, 0);
    for (auto& z : spi.labels[root][0]) z = 0;
    auto report = check_spi(tree, spi);
    EXPECT_NEAR(report.get("SPI2").max_violation, 0.6 - 3.0 / 11.0, 1e-12);
    EXPECT_EQ(report.get("SPI2").witness["fcs"], "0");

    // coin2 has a single joint history per FCS, so every condition holds trivially.
    DecPomdpModel coin = load_fixture("coin2");
    FcsTree ct(coin);
    auto trivial = check_spi(ct, constant_private(ct));
    for (const char* id : {"SPI1", "SPI2", "SPI3", "SPI4"}) EXPECT_EQ(trivial.get(id).max_violation, 0.0) << id;
}

TEST(Belief, PropositionsHoldOnConstructedCompressions) {
    for (const auto& m : models()) {
        FcsTree tree(m);
        for (auto pc : {identity_private(tree), build_exact_private(tree)}) {
            auto report = verify_propositions(tree, pc);
            EXPECT_TRUE(report.pass()) << m.name() << " " << pc.name << " " << report.to_json().dump();
        }
    }
}
