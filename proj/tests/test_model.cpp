#include "support.hpp"

#include "ciplan/errors.hpp"
#include "ciplan/model.hpp"
#include "ciplan/random_model.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

using namespace ciplan;
using ciplan::testing::load_fixture;

namespace {

nlohmann::json tiny_doc() {
    return {{"num_agents", 1},       {"states", {"s"}},      {"actions", {{"a"}}},   {"common_obs", {"c"}},
            {"private_obs", {{"o"}}}, {"transition", {{{1.0}}}}, {"observation", {{{1.0}}}}, {"reward", {{0.0}}},
            {"initial", {1.0}},       {"horizon", 1}};
}

} // namespace

TEST(Model, DegenerateModelHasZeroRewardBound) {
    DecPomdpModel m = load_model(tiny_doc().dump());
    EXPECT_EQ(m.num_agents(), 1);
    EXPECT_EQ(m.num_states(), 1);
    EXPECT_DOUBLE_EQ(m.reward_bound(), 0.0);
}

TEST(Model, ShortTransitionRowIsNamed) {
    auto doc = nlohmann::json::parse(R"({
      "num_agents": 1, "states": ["x", "y"], "actions": [["a", "b"]], "common_obs": ["c"],
      "private_obs": [["o"]],
      "transition": [[[1.0, 0.0], [0.5, 0.5]], [[0.0, 1.0], [0.6, 0.3]]],
      "observation": [[[1.0]], [[1.0]]], "reward": [[0, 0], [0, 0]], "initial": [0.5, 0.5], "horizon": 2})");
    try {
        load_model(doc.dump());
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        ASSERT_EQ(e.violations().size(), 1u);
        EXPECT_NE(e.violations()[0].find("transition row [1][1]"), std::string::npos) << e.violations()[0];
        EXPECT_NE(e.violations()[0].find("0.9"), std::string::npos);
    }
}

TEST(Model, AllViolationsAreListed) {
    auto doc = tiny_doc();
    doc["initial"] = {0.5};
    doc["reward"] = {{2.0}};
    doc["reward_bound"] = 1.0;
    doc["observation"] = {{{-1.0}}};
    try {
        load_model(doc.dump());
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_GE(e.violations().size(), 3u);
    }
}

TEST(Model, ParseErrorsCarryLocus) {
    try {
        load_model("{\n  \"num_agents\": 1,\n  oops\n}");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.locus()).find("line 3"), std::string::npos) << e.what();
    }
    auto doc = tiny_doc();
    doc["transition"] = {{{1.0, 0.0}}};
    try {
        load_model(doc.dump());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("transition"), std::string::npos) << e.what();
    }
    doc = tiny_doc();
    doc.erase("horizon");
    EXPECT_THROW(load_model(doc.dump()), ParseError);
}

TEST(Model, Coin2RoundTrip) {
    DecPomdpModel m = load_fixture("coin2");
    EXPECT_EQ(m.num_states(), 2);
    EXPECT_EQ(m.num_agents(), 2);
    EXPECT_EQ(m.num_joint_actions(), 4);
    EXPECT_EQ(m.horizon(), 2);
    DecPomdpModel again = load_model(serialize_model(m));
    EXPECT_TRUE(again == m);
    EXPECT_EQ(serialize_model(again), serialize_model(m));
}

TEST(Model, Coin2RewardBoundMatchesTensorScan) {
    DecPomdpModel m = load_fixture("coin2");
    double scan = 0;
    for (int s = 0; s < m.num_states(); ++s)
        for (int a = 0; a < m.num_joint_actions(); ++a) scan = std::max(scan, std::abs(m.reward(s, a)));
    EXPECT_DOUBLE_EQ(m.reward_bound(), scan);
}

TEST(Model, NextJointDistributionIsEntrywiseProduct) {
    for (const char* name : {"coin2", "peek2"}) {
        DecPomdpModel m = load_fixture(name);
        const ModelData& d = m.data();
        int S = m.num_states(), JA = m.num_joint_actions(), O0 = m.num_common_obs(), JP = m.num_joint_private_obs();
        for (int s = 0; s < S; ++s)
            for (int ja = 0; ja < JA; ++ja) {
                auto dist = next_joint_distribution(m, s, JointAction{m.decode_action(ja)});
                double total = 0;
                for (const auto& o : dist) {
                    int jp = m.encode_private_obs(o.obs.priv);
                    double hand = d.transition[(s * JA + ja) * S + o.state] * d.observation[(o.state * O0 + o.obs.common) * JP + jp];
                    EXPECT_NEAR(o.p, hand, 1e-15);
                    total += o.p;
                }
                EXPECT_NEAR(total, 1.0, 1e-12);
            }
    }
}

TEST(Model, JointIndicesPutAgentOneFirst) {
    DecPomdpModel m = load_fixture("coin2");
    EXPECT_EQ(m.encode_action(std::vector<int>{1, 0}), 2);
    EXPECT_EQ(m.decode_action(1), (std::vector<int>{0, 1}));
    EXPECT_DOUBLE_EQ(expected_reward(m, 0, JointAction{{0, 1}}), 0.9);
    EXPECT_THROW(expected_reward(m, 0, JointAction{{0, 2}}), DomainError);
}

TEST(Model, RandomModelsAreValidAndSeeded) {
    for (auto seed : ciplan::testing::model_seeds()) {
        auto a = random_model_data(seed);
        EXPECT_TRUE(validate(a).empty());
        EXPECT_EQ(serialize_model(DecPomdpModel(a)), serialize_model(random_model(seed)));
    }
}
