#include "support.hpp"

#include "cli.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using ciplan::testing::data_path;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = ciplan::cli::run_command(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("ciplan_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

} // namespace

TEST(Cli, ValidateAcceptsFixture) {
    auto dir = scratch("validate");
    auto r = run({"validate", "--model", data_path("coin2.json"), "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(read(dir / "validate.json")["valid"].get<bool>());
}

TEST(Cli, ValidateNamesBadRow) {
    auto dir = scratch("bad");
    fs::create_directories(dir);
    auto doc = nlohmann::json::parse(slurp(data_path("coin2.json")));
    doc["transition"][1][0][1] = {0.7, 0.2};
    std::ofstream(dir / "bad.json") << doc.dump();
    auto r = run({"validate", "--model", (dir / "bad.json").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("transition row [1][0][1]"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"solve", "--model", data_path("coin2.json"), "--alg", "6"}).code, 2);
    EXPECT_EQ(run({"solve", "--model", "/nonexistent.json"}).code, 2);
    EXPECT_EQ(run({"verify-gap", "--model", data_path("coin2.json"), "--mu", "other"}).code, 2);
}

TEST(Cli, SolveAndOracleAgree) {
    auto dir = scratch("solve");
    auto s = run({"solve", "--alg", "1", "--model", data_path("coin2.json"), "--out", dir.string()});
    ASSERT_EQ(s.code, 0) << s.err;
    auto o = run({"oracle", "--model", data_path("coin2.json"), "--out", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    double j = read(dir / "solve.json")["objective"];
    double b = read(dir / "oracle.json")["objective"];
    EXPECT_NEAR(j, b, 1e-9);
    EXPECT_TRUE(fs::exists(dir / "solve.txt"));
}

TEST(Cli, EveryAlgorithmReportsTheSameValueOnLosslessInputs) {
    auto dir = scratch("algs");
    std::vector<double> values;
    for (const char* alg : {"1", "2", "3", "4", "5"}) {
        auto r = run({"solve", "--alg", alg, "--model", data_path("peek2.json"), "--out", dir.string(), "--format",
                      "structured"});
        ASSERT_EQ(r.code, 0) << alg << r.err;
        values.push_back(nlohmann::json::parse(r.out)["objective"]);
    }
    for (double v : values) EXPECT_NEAR(v, values.front(), 1e-9);
}

TEST(Cli, CompressMeasureVerifyPipeline) {
    auto dir = scratch("pipeline");
    auto c = run({"compress", "--mode", "greedy", "--tol-r", "0.3", "--tol-o", "0.3", "--model",
                  data_path("peek2.json"), "--out", dir.string()});
    ASSERT_EQ(c.code, 0) << c.err;
    auto priv = (dir / "private.json").string();
    auto com = (dir / "common.json").string();
    auto m = run({"measure", "--model", data_path("peek2.json"), "--compression", priv, "--compression", com, "--out",
                  dir.string()});
    ASSERT_EQ(m.code, 0) << m.err;
    EXPECT_EQ(read(dir / "measure.json")["eps_p"], read(dir / "compress.json")["params"]["eps_p"]);
    auto g = run({"verify-gap", "--model", data_path("peek2.json"), "--compression", com, "--compression", priv,
                  "--out", dir.string()});
    EXPECT_EQ(g.code, 0) << g.err << g.out;
    EXPECT_TRUE(read(dir / "gap.json")["pass"].get<bool>());
}

TEST(Cli, BudgetExhaustionExitsThree) {
    auto r = run({"oracle", "--model", data_path("peek2.json"), "--budget", "100", "--out", scratch("budget").string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("budget"), std::string::npos) << r.err;
}

TEST(Cli, CommonCompressionAloneIsRejected) {
    auto dir = scratch("common_only");
    ASSERT_EQ(run({"compress", "--model", data_path("coin2.json"), "--out", dir.string()}).code, 0);
    auto r = run({"measure", "--model", data_path("coin2.json"), "--compression", (dir / "common.json").string(),
                  "--out", dir.string()});
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, LemmaFalsificationExitsOne) {
    auto dir = scratch("lemmas");
    ASSERT_EQ(run({"compress", "--mode", "greedy", "--tol-r", "0.3", "--tol-o", "0.3", "--model",
                   data_path("peek2.json"), "--out", dir.string()})
                  .code,
              0);
    auto r = run({"check-conditions", "--model", data_path("peek2.json"), "--compression",
                  (dir / "private.json").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 1);
    auto doc = read(dir / "conditions.json");
    EXPECT_FALSE(doc["pass"].get<bool>());
    auto exact = run({"check-conditions", "--model", data_path("coin2.json"), "--out", dir.string()});
    EXPECT_EQ(exact.code, 0) << exact.out;
}

TEST(Cli, ReportsAreByteIdenticalAcrossThreadCounts) {
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "2", "5"}) {
        setenv("CIPLAN_THREADS", threads, 1);
        auto dir = scratch(std::string("det") + threads);
        ASSERT_EQ(run({"compress", "--mode", "greedy", "--tol-r", "0.2", "--tol-o", "0.2", "--model",
                       data_path("peek2.json"), "--out", dir.string()})
                      .code,
                  0);
        ASSERT_EQ(run({"verify-gap", "--model", data_path("peek2.json"), "--compression",
                       (dir / "private.json").string(), "--compression", (dir / "common.json").string(), "--out",
                       dir.string()})
                      .code,
                  0);
        outputs.push_back(slurp(dir / "private.json") + slurp(dir / "common.json") + slurp(dir / "gap.json"));
    }
    unsetenv("CIPLAN_THREADS");
    EXPECT_EQ(outputs[0], outputs[1]);
    EXPECT_EQ(outputs[0], outputs[2]);
}
