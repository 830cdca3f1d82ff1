#include "ciplan/random_model.hpp"

#include <cmath>
#include <random>

namespace ciplan {

namespace {

void random_rows(std::mt19937_64& rng, std::vector<double>& out, int rows, int width, double sparsity) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int r = 0; r < rows; ++r) {
        std::vector<double> row(width);
        double sum = 0;
        for (int k = 0; k < width; ++k) {
            row[k] = u(rng) < sparsity ? 0.0 : u(rng) + 0.05;
            sum += row[k];
        }
        if (sum == 0) {
            row[std::uniform_int_distribution<int>(0, width - 1)(rng)] = 1.0;
            sum = 1.0;
        }
        for (double x : row) out.push_back(x / sum);
    }
}

} // namespace

ModelData random_model_data(std::uint64_t seed, const RandomShape& shape) {
    std::mt19937_64 rng(seed);
    auto draw = [&](int max) { return std::uniform_int_distribution<int>(1, max)(rng); };
    ModelData d;
    d.name = "random-" + std::to_string(seed);
    int S = draw(shape.max_states);
    for (int s = 0; s < S; ++s) d.states.push_back("s" + std::to_string(s));
    int JA = 1, JP = 1;
    for (int n = 0; n < shape.agents; ++n) {
        std::vector<std::string> acts, obs;
        for (int a = 0; a < shape.actions; ++a) acts.push_back("a" + std::to_string(a));
        int On = draw(shape.max_private_obs);
        for (int o = 0; o < On; ++o) obs.push_back("o" + std::to_string(o));
        d.actions.push_back(acts);
        d.private_obs.push_back(obs);
        JA *= shape.actions;
        JP *= On;
    }
    int O0 = draw(shape.max_common_obs);
    for (int o = 0; o < O0; ++o) d.common_obs.push_back("c" + std::to_string(o));
    random_rows(rng, d.transition, S * JA, S, shape.sparsity);
    random_rows(rng, d.observation, S, O0 * JP, shape.sparsity);
    std::uniform_real_distribution<double> r(-1.0, 1.0);
    for (int k = 0; k < S * JA; ++k) d.reward.push_back(std::round(r(rng) * 100) / 100);
    random_rows(rng, d.initial, 1, S, 0.0);
    d.horizon = shape.horizon;
    return d;
}

DecPomdpModel random_model(std::uint64_t seed, const RandomShape& shape) {
    return DecPomdpModel(random_model_data(seed, shape));
}

} // namespace ciplan
