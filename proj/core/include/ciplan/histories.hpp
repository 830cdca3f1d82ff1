#pragma once

#include "ciplan/errors.hpp"
#include "ciplan/model.hpp"

#include <compare>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace ciplan {

/// One agent's action-observation history (o_1, a_1, o_2, ..., o_t).
struct PrivateHistory {
    std::vector<int> seq;
    int length() const { return static_cast<int>(seq.size() + 1) / 2; }
    auto operator<=>(const PrivateHistory&) const = default;
    bool operator==(const PrivateHistory&) const = default;
    std::string str() const;
};

/// Mass on (state, joint private history) given the FCS; hist holds per-agent
/// indices into FcsNode::domain.
struct BeliefAtom {
    int state;
    std::vector<int> hist;
    double prob;
};

/// Contiguous run of atoms sharing a joint private history.
struct FpsRange {
    std::vector<int> hist;
    double prob;
    int begin;
    int end;
};

/// Joint private histories with P(h | h0) and per-state P(s, h | h0).
struct FpsTuple {
    std::vector<PrivateHistory> histories;
    double prob;
    std::vector<double> state_probs;
};

/// Tabular prescription over an indexed domain per agent.
struct Prescription {
    std::vector<std::vector<int>> actions; // [agent][domain index]
    int action(int agent, int index) const { return actions[agent][index]; }
    bool operator==(const Prescription&) const = default;
};

/// Mixed-radix enumeration of prescriptions. Agent 1's first entry is the
/// most significant digit, so index order is lexicographic.
class PrescriptionSpace {
public:
    PrescriptionSpace() = default;
    PrescriptionSpace(std::vector<int> domain_sizes, std::vector<int> action_counts);

    /// Number of prescriptions, saturated at INT64_MAX.
    std::int64_t size() const { return size_; }
    bool saturated() const { return saturated_; }
    Prescription decode(std::int64_t index) const;
    std::int64_t encode(const Prescription& p) const;
    const std::vector<int>& domain_sizes() const { return domain_sizes_; }

private:
    std::vector<int> domain_sizes_;
    std::vector<int> action_counts_;
    std::int64_t size_ = 1;
    bool saturated_ = false;
};

struct FcsNode {
    int id = -1;
    int time = 0;
    int parent = -1;
    std::int64_t prescription = -1; // index in the parent's prescription space
    int common_obs = 0;
    double branch_prob = 1.0; // P(o0 | parent, prescription), or P(o0_1) for roots
    std::vector<std::int64_t> sequence; // o0_1, g_1, o0_2, ..., o0_t
    std::vector<std::vector<PrivateHistory>> domain; // sorted per agent
    std::vector<BeliefAtom> belief; // sorted by (hist, state)
    std::vector<FpsRange> fps;
    /// [agent][parent index * |O^n| + o^n] -> index in domain, or -1.
    std::vector<std::vector<int>> lift;
    PrescriptionSpace space;

    std::string key() const;
    /// Domain index of a history, or -1.
    int find(int agent, const PrivateHistory& h) const;
    /// Index into fps of a joint history, or -1.
    int find_fps(const std::vector<int>& hist) const;
};

struct ChildRef {
    int common_obs;
    int child;
    double prob;
};

/// Coordinator's FCS tree, expanded lazily and memoized by (parent, prescription).
/// Node references stay valid for the tree's lifetime.
class FcsTree {
public:
    explicit FcsTree(const DecPomdpModel& model);

    const DecPomdpModel& model() const { return *model_; }
    const FcsNode& node(int id) const;
    int size() const;
    const std::vector<int>& roots() const { return roots_; }

    /// Children under a prescription (creating them on first use).
    const std::vector<ChildRef>& expand(int id, std::int64_t gamma);
    /// Children of an already expanded edge; throws DomainError otherwise.
    const std::vector<ChildRef>& children(int id, std::int64_t gamma) const;

    /// Expands every node under every prescription. Counts (node x prescription)
    /// pairs against budget and throws BudgetExceeded naming the node.
    void build_full(long long budget = kDefaultBudget);
    bool is_full() const { return full_; }
    /// Node ids at time t created by build_full, in id order.
    const std::vector<int>& level(int t) const { return levels_.at(t - 1); }
    long long evaluations() const { return evaluations_; }

    /// Structured listing of one level: id, parent, sequence, FPS count.
    nlohmann::json dump_level(int t) const;

private:
    struct Pending {
        int parent;
        std::int64_t gamma;
        FcsNode node;
    };
    std::vector<Pending> compute_children(int id, std::int64_t gamma) const;
    int register_node(FcsNode node);

    const DecPomdpModel* model_;
    mutable std::shared_mutex mutex_;
    std::vector<std::unique_ptr<FcsNode>> nodes_;
    std::vector<std::unordered_map<std::int64_t, std::vector<ChildRef>>> edges_;
    std::vector<int> roots_;
    std::vector<std::vector<int>> levels_;
    bool full_ = false;
    long long evaluations_ = 0;
};

/// Admissible joint private histories of a node with their probabilities.
std::vector<FpsTuple> reachable_fps(const FcsTree& tree, int node);

/// Prescriptions over the node's private histories, in canonical order.
std::vector<Prescription> enumerate_prescriptions(const FcsTree& tree, int node);

/// Prescriptions over per-agent label domains (sizes), in canonical order.
std::vector<Prescription> enumerate_prescriptions(const std::vector<int>& label_domain_sizes,
                                                  const DecPomdpModel& model);

/// Children of node under gamma: (o0, child id, P(o0 | node, gamma)).
std::vector<ChildRef> expand_fcs(FcsTree& tree, int node, const Prescription& gamma);

/// Joint action chosen by a prescription at a joint history.
int joint_action(const DecPomdpModel& model, const Prescription& gamma, const std::vector<int>& hist);

} // namespace ciplan
