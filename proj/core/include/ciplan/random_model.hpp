#pragma once

#include "ciplan/model.hpp"

#include <cstdint>

namespace ciplan {

/// Size limits for generated models; each count is drawn uniformly in [1, max]
/// except actions, which are fixed.
struct RandomShape {
    int agents = 2;
    int max_states = 3;
    int actions = 2;
    int max_common_obs = 2;
    int max_private_obs = 2;
    int horizon = 2;
    double sparsity = 0.3; // chance of zeroing a non-leading entry of a row
};

/// Valid model drawn from a seeded mt19937_64.
ModelData random_model_data(std::uint64_t seed, const RandomShape& shape = {});
DecPomdpModel random_model(std::uint64_t seed, const RandomShape& shape = {});

} // namespace ciplan
