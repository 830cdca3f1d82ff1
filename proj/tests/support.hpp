#pragma once

#include "ciplan/histories.hpp"
#include "ciplan/model.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ciplan::testing {

std::string data_path(const std::string& name);
DecPomdpModel load_fixture(const std::string& name);

/// Seeds of the random models used across the suites.
const std::vector<std::uint64_t>& model_seeds();

/// Exhaustive enumeration of raw trajectories (states, joint observations,
/// actions) that reproduce a node's common sequence. Actions come from the
/// prescriptions on the node's ancestor path, looked up by history string.
struct TrajectoryResult {
    double mass = 0; // P(o0_1, ..., o0_t | gamma_1, ..., gamma_{t-1})
    std::map<std::pair<int, std::vector<std::string>>, double> joint; // (state, histories) -> conditional prob
};
TrajectoryResult enumerate_trajectories(const FcsTree& tree, int node);

/// Expected return of a coordinator choice function over raw trajectories.
double trajectory_value(const FcsTree& tree, const std::vector<std::int64_t>& choice);

/// Expected return from node given the joint private histories, taking gamma at the
/// node and following choice afterwards.
double trajectory_supervisor_q(const FcsTree& tree, const std::vector<std::int64_t>& choice, int node,
                               const std::vector<std::string>& hist, std::int64_t gamma);

} // namespace ciplan::testing
