#pragma once

#include "ciplan/histories.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ciplan {

struct ValueEntry {
    double value = 0;
    std::int64_t argmax = -1;
    std::vector<double> q; // by prescription index; empty unless kept
};

/// Values per time step keyed by state key (FCS key, BCS fingerprint or label).
struct ValueTable {
    std::vector<std::map<std::string, ValueEntry>> by_time; // index t-1
    double objective = 0; // J

    const ValueEntry& at(int t, const std::string& key) const;
    bool contains(int t, const std::string& key) const;
};

/// Prescription index chosen at each FCS node; -1 where undefined.
struct CoordinatorPolicy {
    std::vector<std::int64_t> choice; // by node id
    std::int64_t at(int node) const;
};

struct SolveOptions {
    long long budget = kDefaultBudget;
    bool keep_q = false;
};

struct FcsSolution {
    ValueTable table;
    CoordinatorPolicy policy;
    std::vector<double> value; // by node id
    std::vector<std::vector<double>> q; // by node id, all prescriptions
    double objective = 0;
};

/// Expected immediate reward E[r(S, gamma(H)) | h0].
double immediate_reward(const DecPomdpModel& model, const FcsNode& node, const Prescription& gamma);

/// Exact DP over the full FCS tree with FPS-based prescriptions.
FcsSolution solve_fcs_fps(FcsTree& tree, const SolveOptions& options = {});

/// Expected return from (h0, h) when gamma is applied now and the solution's
/// policy afterwards, by forward trajectory enumeration.
double supervisor_q(const FcsTree& tree, const FcsSolution& solution, int node, const std::vector<int>& hist,
                    std::int64_t gamma);
/// supervisor_q under the solution's own choice at the node.
double supervisor_v(const FcsTree& tree, const FcsSolution& solution, int node, const std::vector<int>& hist);

/// Backward evaluation of a coordinator policy over the tree; values by node id.
std::vector<double> evaluate_policy(const FcsTree& tree, const CoordinatorPolicy& policy);
/// Forward trajectory evaluation of a coordinator policy from the model.
double evaluate_policy_forward(const FcsTree& tree, const CoordinatorPolicy& policy);

/// Number of deterministic coordinator policies, saturated at INT64_MAX.
std::int64_t count_policies(const FcsTree& tree);

/// Maximum expected return over every deterministic coordinator policy.
/// Throws BudgetExceeded when the policy count exceeds budget.
double brute_force_value(FcsTree& tree, long long budget = kDefaultBudget);

/// P(S', O^{1:N} | h0, h, gamma) from the child nodes, dense over (s', jp).
std::vector<double> next_step_via_prescription(const FcsTree& tree, int node, const std::vector<int>& hist,
                                               std::int64_t gamma);
/// P(S', O^{1:N} | h0, h, a) from the model, dense over (s', jp).
std::vector<double> next_step_via_action(const FcsTree& tree, int node, const std::vector<int>& hist, int joint_action);

} // namespace ciplan
