#pragma once

#include "ciplan/histories.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace ciplan {

/// Key of the private update: (agent, child FCS node, parent label, own observation).
/// The child node fixes the prescription and the common observation of the step.
struct PrivateUpdateKey {
    int agent;
    int child;
    int label;
    int obs;
    auto operator<=>(const PrivateUpdateKey&) const = default;
};

/// Private labels for every (FCS node, agent, private history) of a full tree.
struct PrivateCompression {
    std::string name;
    std::vector<std::vector<std::vector<int>>> labels; // [node][agent][domain index]
    std::map<PrivateUpdateKey, int> update;

    int label(int node, int agent, int index) const { return labels[node][agent][index]; }
    /// Sorted distinct labels of an agent's reachable histories at a node.
    std::vector<int> label_domain(int node, int agent) const;
    /// Distinct labels used per (agent, t).
    std::vector<std::vector<int>> alphabet(const FcsTree& tree) const;
};

/// Key of the common update: (t, label, label-prescription index, o0).
struct CommonUpdateKey {
    int time;
    int label;
    std::int64_t lambda;
    int obs;
    auto operator<=>(const CommonUpdateKey&) const = default;
};

/// Common labels for FCS nodes reachable by label-based prescriptions.
struct CommonCompression {
    std::string name;
    std::vector<int> labels; // by node id, -1 if not covered
    std::map<CommonUpdateKey, int> update;
};

/// One edge that breaks the recursive update.
struct RecursionViolation {
    std::string edge;
    std::string detail;
};

struct RecursionReport {
    bool pass = true;
    std::vector<RecursionViolation> violations;
    nlohmann::json to_json() const;
};

/// Tuple attaining a measured supremum.
struct Witness {
    int time = 0;
    int node = -1;
    std::string fcs;
    std::vector<int> hist;    // private side: joint history indices
    std::int64_t action = -1; // joint action (private) or label prescription (common)
    int label = -1;           // common side: label of the node
    double value = 0;         // raw discrepancy before scaling
};

struct MeasuredParams {
    double eps_p = 0, delta_p = 0, eps_c = 0, delta_c = 0;
    Witness eps_p_witness, delta_p_witness, eps_c_witness, delta_c_witness;
    std::string mu = "uniform";
    nlohmann::json to_json() const;
};

/// Nodes reachable through prescriptions extended from the private labels.
struct LabelTree {
    std::vector<int> nodes;                  // in id order
    std::vector<char> member;                // by node id
    std::vector<std::vector<std::vector<int>>> domain; // [node][agent] sorted labels
    std::vector<std::vector<std::int64_t>> gamma;      // [node][lambda] -> prescription index
    std::vector<double> mu;                  // reference weight by node id
};

/// Half the L1 distance. Throws DomainError on size mismatch.
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

/// gamma(h) = lambda(label(h)) as a prescription index at the node.
std::int64_t extend_prescription(const FcsTree& tree, const PrivateCompression& pc, int node,
                                 const std::vector<std::vector<int>>& domain, const Prescription& lambda);

/// Builds the label tree (expanding the full tree first) with uniform reference weights.
LabelTree build_label_tree(FcsTree& tree, const PrivateCompression& pc, long long budget = kDefaultBudget);

RecursionReport check_recursive(const FcsTree& tree, const PrivateCompression& pc);
RecursionReport check_recursive(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                                const CommonCompression& cc);

/// (eps_p, delta_p) with factors 4 and 8 folded in.
MeasuredParams measure_private(const FcsTree& tree, const PrivateCompression& pc);
/// Raw reward and observation discrepancy of one private witness tuple.
std::pair<double, double> private_discrepancy(const FcsTree& tree, const PrivateCompression& pc, int node,
                                              const std::vector<int>& hist, int joint_action);

/// (eps_c, delta_c) with factor 2 on delta folded in; mu is recorded.
MeasuredParams measure_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                              const CommonCompression& cc, const std::string& mu = "uniform");
std::pair<double, double> common_discrepancy(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                                             const CommonCompression& cc, int node, std::int64_t lambda);

/// Label i for domain index i.
PrivateCompression identity_private(FcsTree& tree, long long budget = kDefaultBudget);
/// Label 0 everywhere.
PrivateCompression constant_private(FcsTree& tree, long long budget = kDefaultBudget);
/// Coarsest presence-exact lossless partition, refined backward in time.
PrivateCompression build_exact_private(FcsTree& tree, long long budget = kDefaultBudget);
/// Canonical-order agglomeration with reward/observation tolerances, closed under updates.
PrivateCompression build_greedy(FcsTree& tree, double tol_r, double tol_o, long long budget = kDefaultBudget);
/// Random recursive compression with at most max_labels fresh labels per update.
PrivateCompression random_private(FcsTree& tree, std::mt19937_64& rng, int max_labels,
                                  long long budget = kDefaultBudget);
/// Splits one block (along update keys) into two; result stays recursive.
/// Returns false when no block can be split.
bool refine_private(const FcsTree& tree, PrivateCompression& pc, std::mt19937_64& rng);
/// Fills the update table from labels; conflicts are left to check_recursive.
void derive_private_updates(const FcsTree& tree, PrivateCompression& pc);

CommonCompression identity_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt);
/// Nodes with equal belief fingerprints share a label.
CommonCompression bcs_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt);
/// Random recursive common compression with about max_labels labels per t.
CommonCompression random_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                                std::mt19937_64& rng, int max_labels);
void derive_common_updates(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                           CommonCompression& cc);

/// Union of a common label's preimage label domains, per agent.
std::vector<std::vector<int>> union_domain(const FcsTree& tree, const LabelTree& lt, const CommonCompression& cc,
                                           int time, int label);

/// Member nodes of each (t, common label), in id order.
std::map<std::pair<int, int>, std::vector<int>> common_preimages(const FcsTree& tree, const LabelTree& lt,
                                                                 const CommonCompression& cc);
/// Calls f(lambda index, member node, prescription index at the member) for every
/// prescription over a union label domain.
void visit_union_prescriptions(const FcsTree& tree, const LabelTree& lt, const std::vector<int>& members,
                               const std::vector<std::vector<int>>& domain,
                               const std::function<void(std::int64_t, int, std::int64_t)>& f);

/// Compression documents. Node references are stored as FCS keys.
nlohmann::json private_to_json(const FcsTree& tree, const PrivateCompression& pc, const MeasuredParams* params = nullptr);
PrivateCompression private_from_json(FcsTree& tree, const nlohmann::json& doc, long long budget = kDefaultBudget);
nlohmann::json common_to_json(const FcsTree& tree, const CommonCompression& cc, const MeasuredParams* params = nullptr);
CommonCompression common_from_json(FcsTree& tree, const nlohmann::json& doc);

} // namespace ciplan
