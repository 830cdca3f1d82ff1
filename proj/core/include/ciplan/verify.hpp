#pragma once

#include "ciplan/approx_dp.hpp"
#include "ciplan/belief.hpp"

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ciplan {

enum class BoundKind { thm1, thm2, thm3, prop5, prop6, lem2 };

/// Throws DomainError for an unknown name.
BoundKind parse_bound_kind(const std::string& name);
std::string to_string(BoundKind kind);

/// Closed-form optimality-gap bound with t_bar remaining steps.
double gap_bound(BoundKind kind, int t_bar, int horizon, double reward_bound, const MeasuredParams& params);

struct GapRow {
    int t;
    std::string key; // FCS key, or "sup" for the per-time aggregate
    std::string kind;
    double observed;
    double bound;
    double slack;
    bool pass;
};

struct GapReport {
    std::vector<GapRow> rows;
    MeasuredParams params;
    std::string private_name;
    std::string common_name;
    double exact_objective = 0;
    double private_objective = 0;
    double common_objective = 0;
    bool pass = true;
    bool complete = true; // false when a DP ran out of budget; rows cover what finished
    std::string error;
    double min_slack = 0;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Runs the exact, private-label and common-label DPs and checks every gap row.
/// A budget overrun in the compressed DPs yields a partial, failing report.
GapReport verify_gaps(FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt, const CommonCompression& cc,
                      const std::string& mu = "uniform", const SolveOptions& options = {});

/// Exhaustive checks of the supervisor identities and the same-label bounds.
ConditionReport check_lemmas(FcsTree& tree, const PrivateCompression& pc, const SolveOptions& options = {});

} // namespace ciplan
