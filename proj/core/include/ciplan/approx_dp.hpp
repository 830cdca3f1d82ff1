#pragma once

#include "ciplan/compression.hpp"
#include "ciplan/exact_dp.hpp"

#include <map>
#include <string>
#include <vector>

namespace ciplan {

/// Preimage structure of one FCS under a private compression.
struct ExtensionContext {
    const FcsTree* tree;
    const PrivateCompression* pc;
    int node;
    std::vector<std::vector<int>> domain; // sorted labels per agent
    /// [agent][label position] -> domain indices carrying that label
    std::vector<std::vector<std::vector<int>>> preimage;
};

ExtensionContext make_extension_context(const FcsTree& tree, const PrivateCompression& pc, int node);

/// Prescription over the node's private histories given one over its labels.
Prescription extend_prescription(const ExtensionContext& ctx, const Prescription& lambda);

struct AspsSolution {
    ValueTable table;                    // keyed by FCS key
    std::vector<double> value;           // by node id, NaN outside the label tree
    std::vector<std::int64_t> lambda;    // argmax label prescription by node id
    CoordinatorPolicy policy;            // extended argmax
    LabelTree labels;
    double objective = 0;
};

/// DP over the FCS tree restricted to label-based prescriptions.
AspsSolution solve_fcs_asps(FcsTree& tree, const PrivateCompression& pc, const SolveOptions& options = {});

struct AscsSolution {
    ValueTable table;                                 // keyed by "z<label>"
    std::vector<std::map<int, double>> value;         // [t-1] label -> value
    std::vector<std::map<int, std::int64_t>> lambda;  // [t-1] label -> argmax over the union domain
    std::string mu;
    double objective = 0;
    double at(int t, int label) const;
};

/// DP over common labels with mu-weighted preimage mixtures.
AscsSolution solve_ascs_asps(FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                             const CommonCompression& cc, const std::string& mu = "uniform",
                             const SolveOptions& options = {});

/// The common-label argmax executed on the real tree: each reached node applies its
/// label's argmax restricted to the node and extended through the private labels.
CoordinatorPolicy ascs_policy(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                              const CommonCompression& cc, const AscsSolution& sol);

} // namespace ciplan
