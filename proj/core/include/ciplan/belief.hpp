#pragma once

#include "ciplan/compression.hpp"
#include "ciplan/exact_dp.hpp"

#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ciplan {

/// Distribution over (state, joint private history) at time t. domain holds the
/// sorted histories per agent; atoms index into it and are sorted by (hist, state).
struct BeliefState {
    int time = 0;
    std::vector<std::vector<PrivateHistory>> domain;
    std::vector<BeliefAtom> atoms;

    /// Canonical support with probabilities rounded to 1e-9.
    std::string fingerprint() const;
    /// Short hex digest of the fingerprint, for reports.
    std::string digest() const;
};

BeliefState belief_of(const FcsNode& node);

/// Direct conditional P(S_t, H_t | h0) by forward enumeration from the prior.
BeliefState compute_bcs(const FcsTree& tree, int node);

/// One Bayesian step: belief after applying gamma (over pi's domain) and observing o0.
/// Throws DomainError if P(o0 | pi, gamma) is not above the admissibility threshold.
BeliefState bayes_update(const DecPomdpModel& model, const BeliefState& pi, const Prescription& gamma, int o0);

/// Probability of each common observation after gamma.
std::vector<double> common_obs_distribution(const DecPomdpModel& model, const BeliefState& pi, const Prescription& gamma);

struct BcsSolution {
    ValueTable table; // keyed by belief digest
    double objective = 0;
    long long entries = 0;
    /// Value of a fingerprint at time t; throws if not solved.
    double value(int t, const std::string& fingerprint) const;
    std::vector<std::map<std::string, double>> by_fingerprint;
};

/// DP over beliefs reached from the roots by Bayesian updates, keyed by fingerprint.
BcsSolution solve_bcs_fps(const DecPomdpModel& model, const SolveOptions& options = {});

/// Private labels indexed like PrivateCompression (the update table is optional).
using SpiMap = PrivateCompression;

struct ConditionResult {
    std::string id;
    bool pass = true;
    double max_violation = 0;
    long long cases = 0;
    double min_slack = std::numeric_limits<double>::infinity(); // bound minus observed, where a bound applies
    nlohmann::json witness = nullptr;
    std::string note = {};
};

struct ConditionReport {
    std::vector<ConditionResult> conditions;
    bool pass() const;
    const ConditionResult& get(const std::string& id) const;
    nlohmann::json to_json() const;
};

/// Evaluates SPI1 to SPI4 exhaustively at tolerance tol.
ConditionReport check_spi(FcsTree& tree, const SpiMap& spi, double tol = kEqual);

/// DP over label beliefs with label-based prescriptions. Throws CompressionError
/// unless spi passes check_spi.
BcsSolution solve_bcs_spi(FcsTree& tree, const SpiMap& spi, const SolveOptions& options = {});

/// Implication checks: BCS common compression is exact; (SPS1, SPS3) give SPI3;
/// (SPS2, SPI4) give SPI2. Premises at 1e-9, conclusions at 1e-6.
ConditionReport verify_propositions(FcsTree& tree, const PrivateCompression& pc);

} // namespace ciplan
