#include "ciplan/approx_dp.hpp"
#include "ciplan/belief.hpp"
#include "ciplan/random_model.hpp"
#include "ciplan/verify.hpp"

#include <benchmark/benchmark.h>

#include <string>

using namespace ciplan;

namespace {

DecPomdpModel fixture(const std::string& name) {
    return load_model_file(std::string(CIPLAN_DATA_DIR) + "/" + name + ".json");
}

// Arg 0 selects peek2, any other value the random model with that seed.
DecPomdpModel model_for(std::int64_t arg) { return arg == 0 ? fixture("peek2") : random_model(arg); }

void BM_BuildFull(benchmark::State& state) {
    DecPomdpModel m = model_for(state.range(0));
    for (auto _ : state) {
        FcsTree tree(m);
        tree.build_full();
        benchmark::DoNotOptimize(tree.size());
    }
}
BENCHMARK(BM_BuildFull)->Arg(0)->Arg(37)->Unit(benchmark::kMillisecond);

void BM_SolveFcsFps(benchmark::State& state) {
    DecPomdpModel m = model_for(state.range(0));
    for (auto _ : state) {
        FcsTree tree(m);
        benchmark::DoNotOptimize(solve_fcs_fps(tree).objective);
    }
}
BENCHMARK(BM_SolveFcsFps)->Arg(0)->Arg(37)->Unit(benchmark::kMillisecond);

void BM_SolveBcsFps(benchmark::State& state) {
    DecPomdpModel m = model_for(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(solve_bcs_fps(m).objective);
}
BENCHMARK(BM_SolveBcsFps)->Arg(0)->Arg(37)->Unit(benchmark::kMillisecond);

void BM_BuildExactPrivate(benchmark::State& state) {
    DecPomdpModel m = model_for(state.range(0));
    FcsTree tree(m);
    tree.build_full();
    for (auto _ : state) benchmark::DoNotOptimize(build_exact_private(tree).labels.size());
}
BENCHMARK(BM_BuildExactPrivate)->Arg(0)->Arg(37)->Unit(benchmark::kMillisecond);

void BM_MeasurePrivate(benchmark::State& state) {
    DecPomdpModel m = model_for(state.range(0));
    FcsTree tree(m);
    auto pc = build_greedy(tree, 0.3, 0.3);
    for (auto _ : state) benchmark::DoNotOptimize(measure_private(tree, pc).eps_p);
}
BENCHMARK(BM_MeasurePrivate)->Arg(0)->Arg(37)->Unit(benchmark::kMillisecond);

void BM_VerifyGaps(benchmark::State& state) {
    DecPomdpModel m = model_for(state.range(0));
    FcsTree tree(m);
    auto pc = build_greedy(tree, 0.3, 0.3);
    auto lt = build_label_tree(tree, pc);
    auto cc = bcs_common(tree, pc, lt);
    for (auto _ : state) benchmark::DoNotOptimize(verify_gaps(tree, pc, lt, cc, "uniform").pass);
}
BENCHMARK(BM_VerifyGaps)->Arg(0)->Arg(37)->Unit(benchmark::kMillisecond);

void BM_CheckLemmas(benchmark::State& state) {
    DecPomdpModel m = model_for(state.range(0));
    FcsTree tree(m);
    auto pc = build_exact_private(tree);
    for (auto _ : state) benchmark::DoNotOptimize(check_lemmas(tree, pc).pass());
}
BENCHMARK(BM_CheckLemmas)->Arg(0)->Arg(37)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
