#include "ciplan/histories.hpp"

#include "ciplan/parallel.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace ciplan {

std::string PrivateHistory::str() const {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += '.';
        out += std::to_string(seq[i]);
    }
    return out;
}

PrescriptionSpace::PrescriptionSpace(std::vector<int> domain_sizes, std::vector<int> action_counts)
    : domain_sizes_(std::move(domain_sizes)), action_counts_(std::move(action_counts)) {
    constexpr std::int64_t cap = std::numeric_limits<std::int64_t>::max();
    size_ = 1;
    for (std::size_t n = 0; n < domain_sizes_.size(); ++n)
        for (int i = 0; i < domain_sizes_[n]; ++i) {
            if (size_ > cap / action_counts_[n]) {
                size_ = cap;
                saturated_ = true;
                return;
            }
            size_ *= action_counts_[n];
        }
}

Prescription PrescriptionSpace::decode(std::int64_t index) const {
    if (saturated_ || index < 0 || index >= size_) throw DomainError("prescription index out of range");
    Prescription p;
    p.actions.resize(domain_sizes_.size());
    for (std::size_t n = 0; n < domain_sizes_.size(); ++n) p.actions[n].assign(domain_sizes_[n], 0);
    for (int n = static_cast<int>(domain_sizes_.size()) - 1; n >= 0; --n)
        for (int i = domain_sizes_[n] - 1; i >= 0; --i) {
            p.actions[n][i] = static_cast<int>(index % action_counts_[n]);
            index /= action_counts_[n];
        }
    return p;
}

std::int64_t PrescriptionSpace::encode(const Prescription& p) const {
    if (p.actions.size() != domain_sizes_.size()) throw DomainError("prescription domain mismatch: agent count");
    std::int64_t index = 0;
    for (std::size_t n = 0; n < domain_sizes_.size(); ++n) {
        if (static_cast<int>(p.actions[n].size()) != domain_sizes_[n])
            throw DomainError("prescription domain mismatch for agent " + std::to_string(n));
        for (int a : p.actions[n]) {
            if (a < 0 || a >= action_counts_[n]) throw DomainError("prescription action out of range");
            index = index * action_counts_[n] + a;
        }
    }
    return index;
}

std::string FcsNode::key() const {
    std::string out;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(sequence[i]);
    }
    return out;
}

int FcsNode::find(int agent, const PrivateHistory& h) const {
    const auto& d = domain[agent];
    auto it = std::lower_bound(d.begin(), d.end(), h);
    if (it == d.end() || !(*it == h)) return -1;
    return static_cast<int>(it - d.begin());
}

int FcsNode::find_fps(const std::vector<int>& hist) const {
    auto it = std::lower_bound(fps.begin(), fps.end(), hist,
                               [](const FpsRange& r, const std::vector<int>& h) { return r.hist < h; });
    if (it == fps.end() || it->hist != hist) return -1;
    return static_cast<int>(it - fps.begin());
}

int joint_action(const DecPomdpModel& model, const Prescription& gamma, const std::vector<int>& hist) {
    int ja = 0;
    for (int n = 0; n < model.num_agents(); ++n) ja += gamma.actions[n][hist[n]] * model.action_stride(n);
    return ja;
}

namespace {

using RawKey = std::pair<std::vector<PrivateHistory>, int>;
using RawAtoms = std::map<RawKey, double>;

// Builds a node from unnormalized atoms conditioned on one common observation.
FcsNode finalize(const DecPomdpModel& model, const RawAtoms& raw, double total) {
    int N = model.num_agents();
    FcsNode node;
    std::vector<std::pair<const RawKey*, double>> kept;
    double kept_mass = 0;
    for (const auto& [k, p] : raw)
        if (p / total > kAdmissible) {
            kept.emplace_back(&k, p);
            kept_mass += p;
        }
    node.domain.resize(N);
    for (const auto& [k, p] : kept)
        for (int n = 0; n < N; ++n) node.domain[n].push_back(k->first[n]);
    for (auto& d : node.domain) {
        std::sort(d.begin(), d.end());
        d.erase(std::unique(d.begin(), d.end()), d.end());
    }
    for (const auto& [k, p] : kept) {
        BeliefAtom atom{k->second, std::vector<int>(N), p / kept_mass};
        for (int n = 0; n < N; ++n) atom.hist[n] = node.find(n, k->first[n]);
        node.belief.push_back(std::move(atom));
    }
    // map order is (histories, state), which matches (indices, state)
    for (int i = 0; i < static_cast<int>(node.belief.size()); ++i) {
        const auto& a = node.belief[i];
        if (node.fps.empty() || node.fps.back().hist != a.hist) node.fps.push_back({a.hist, 0.0, i, i});
        node.fps.back().prob += a.prob;
        node.fps.back().end = i + 1;
    }
    std::vector<int> sizes(N), counts(N);
    for (int n = 0; n < N; ++n) {
        sizes[n] = static_cast<int>(node.domain[n].size());
        counts[n] = model.num_actions(n);
    }
    node.space = PrescriptionSpace(sizes, counts);
    return node;
}

} // namespace

FcsTree::FcsTree(const DecPomdpModel& model) : model_(&model) {
    int N = model.num_agents();
    std::map<int, RawAtoms> by_obs;
    std::map<int, double> totals;
    for (int s = 0; s < model.num_states(); ++s) {
        if (model.initial(s) <= 0) continue;
        for (const auto& e : model.emissions(s)) {
            std::vector<PrivateHistory> h(N);
            for (int n = 0; n < N; ++n) h[n].seq = {model.private_obs_of(e.priv, n)};
            double p = model.initial(s) * e.p;
            by_obs[e.common][{h, s}] += p;
            totals[e.common] += p;
        }
    }
    levels_.resize(model.horizon());
    for (const auto& [o0, raw] : by_obs) {
        double total = totals[o0];
        if (total <= kAdmissible) continue;
        FcsNode node = finalize(model, raw, total);
        node.time = 1;
        node.common_obs = o0;
        node.branch_prob = total;
        node.sequence = {o0};
        int id = register_node(std::move(node));
        roots_.push_back(id);
        levels_[0].push_back(id);
    }
}

const FcsNode& FcsTree::node(int id) const {
    std::shared_lock lock(mutex_);
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw DomainError("FCS node " + std::to_string(id) + " not in tree");
    return *nodes_[id];
}

int FcsTree::size() const {
    std::shared_lock lock(mutex_);
    return static_cast<int>(nodes_.size());
}

int FcsTree::register_node(FcsNode node) {
    node.id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::make_unique<FcsNode>(std::move(node)));
    edges_.emplace_back();
    return nodes_.back()->id;
}

std::vector<FcsTree::Pending> FcsTree::compute_children(int id, std::int64_t gamma) const {
    const FcsNode& parent = node(id);
    const DecPomdpModel& model = *model_;
    if (parent.time >= model.horizon()) throw DomainError("FCS node " + parent.key() + " is at the horizon");
    int N = model.num_agents();
    Prescription g = parent.space.decode(gamma);

    std::map<int, RawAtoms> by_obs;
    std::map<int, double> totals;
    for (const auto& atom : parent.belief) {
        int ja = joint_action(model, g, atom.hist);
        for (const auto& [s2, pt] : model.successors(atom.state, ja))
            for (const auto& e : model.emissions(s2)) {
                std::vector<PrivateHistory> h(N);
                for (int n = 0; n < N; ++n) {
                    h[n] = parent.domain[n][atom.hist[n]];
                    h[n].seq.push_back(g.actions[n][atom.hist[n]]);
                    h[n].seq.push_back(model.private_obs_of(e.priv, n));
                }
                double p = atom.prob * pt * e.p;
                by_obs[e.common][{std::move(h), s2}] += p;
                totals[e.common] += p;
            }
    }
    std::vector<Pending> out;
    for (const auto& [o0, raw] : by_obs) {
        double total = totals[o0];
        if (total <= kAdmissible) continue;
        FcsNode child = finalize(model, raw, total);
        child.time = parent.time + 1;
        child.parent = id;
        child.prescription = gamma;
        child.common_obs = o0;
        child.branch_prob = total;
        child.sequence = parent.sequence;
        child.sequence.push_back(gamma);
        child.sequence.push_back(o0);
        child.lift.resize(N);
        for (int n = 0; n < N; ++n) {
            int On = model.num_private_obs(n);
            child.lift[n].assign(parent.domain[n].size() * On, -1);
            for (std::size_t p = 0; p < parent.domain[n].size(); ++p)
                for (int o = 0; o < On; ++o) {
                    PrivateHistory h = parent.domain[n][p];
                    h.seq.push_back(g.actions[n][p]);
                    h.seq.push_back(o);
                    child.lift[n][p * On + o] = child.find(n, h);
                }
        }
        out.push_back({id, gamma, std::move(child)});
    }
    return out;
}

const std::vector<ChildRef>& FcsTree::expand(int id, std::int64_t gamma) {
    {
        std::shared_lock lock(mutex_);
        if (id < 0 || id >= static_cast<int>(nodes_.size())) throw DomainError("FCS node " + std::to_string(id) + " not in tree");
        auto it = edges_[id].find(gamma);
        if (it != edges_[id].end()) return it->second;
    }
    auto pending = compute_children(id, gamma);
    std::unique_lock lock(mutex_);
    auto it = edges_[id].find(gamma);
    if (it != edges_[id].end()) return it->second;
    std::vector<ChildRef> refs;
    for (auto& p : pending) {
        double prob = p.node.branch_prob;
        int o0 = p.node.common_obs;
        refs.push_back({o0, register_node(std::move(p.node)), prob});
    }
    return edges_[id].emplace(gamma, std::move(refs)).first->second;
}

const std::vector<ChildRef>& FcsTree::children(int id, std::int64_t gamma) const {
    std::shared_lock lock(mutex_);
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw DomainError("FCS node " + std::to_string(id) + " not in tree");
    auto it = edges_[id].find(gamma);
    if (it == edges_[id].end())
        throw DomainError("edge (" + nodes_[id]->key() + ", " + std::to_string(gamma) + ") not expanded");
    return it->second;
}

void FcsTree::build_full(long long budget) {
    if (full_) return;
    int T = model_->horizon();
    long long count = 0;
    for (int t = 1; t <= T; ++t) {
        const std::vector<int> current = levels_[t - 1];
        for (int id : current) {
            const FcsNode& n = node(id);
            if (n.space.saturated() || count + n.space.size() > budget)
                throw BudgetExceeded("FCS node " + n.key() + " (t=" + std::to_string(t) + ")",
                                     n.space.saturated() ? std::numeric_limits<long long>::max()
                                                         : count + n.space.size(),
                                     budget);
            count += n.space.size();
        }
        if (t == T) break;
        struct Task {
            int id;
            std::int64_t gamma;
        };
        std::vector<Task> tasks;
        for (int id : current)
            for (std::int64_t g = 0; g < node(id).space.size(); ++g) tasks.push_back({id, g});
        std::vector<std::vector<Pending>> results(tasks.size());
        std::vector<char> existed(tasks.size(), 0);
        {
            std::shared_lock lock(mutex_);
            for (std::size_t i = 0; i < tasks.size(); ++i)
                existed[i] = edges_[tasks[i].id].count(tasks[i].gamma) ? 1 : 0;
        }
        parallel_for(tasks.size(), [&](std::size_t i) {
            if (!existed[i]) results[i] = compute_children(tasks[i].id, tasks[i].gamma);
        });
        std::unique_lock lock(mutex_);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (existed[i]) {
                for (const auto& c : edges_[tasks[i].id].at(tasks[i].gamma)) levels_[t].push_back(c.child);
                continue;
            }
            std::vector<ChildRef> refs;
            for (auto& p : results[i]) {
                double prob = p.node.branch_prob;
                int o0 = p.node.common_obs;
                int cid = register_node(std::move(p.node));
                refs.push_back({o0, cid, prob});
                levels_[t].push_back(cid);
            }
            edges_[tasks[i].id].emplace(tasks[i].gamma, std::move(refs));
        }
    }
    evaluations_ = count;
    full_ = true;
}

nlohmann::json FcsTree::dump_level(int t) const {
    nlohmann::json rows = nlohmann::json::array();
    std::vector<int> ids;
    {
        std::shared_lock lock(mutex_);
        for (const auto& n : nodes_)
            if (n->time == t) ids.push_back(n->id);
    }
    for (int id : ids) {
        const FcsNode& n = node(id);
        rows.push_back({{"id", n.id}, {"parent", n.parent}, {"sequence", n.sequence}, {"fps_count", n.fps.size()}});
    }
    return {{"t", t}, {"nodes", rows}};
}

std::vector<FpsTuple> reachable_fps(const FcsTree& tree, int id) {
    const FcsNode& node = tree.node(id);
    int N = tree.model().num_agents();
    std::vector<FpsTuple> out;
    for (const auto& r : node.fps) {
        FpsTuple f;
        for (int n = 0; n < N; ++n) f.histories.push_back(node.domain[n][r.hist[n]]);
        f.prob = r.prob;
        f.state_probs.assign(tree.model().num_states(), 0.0);
        for (int i = r.begin; i < r.end; ++i) f.state_probs[node.belief[i].state] += node.belief[i].prob;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<Prescription> enumerate_prescriptions(const FcsTree& tree, int id) {
    const FcsNode& node = tree.node(id);
    for (std::size_t n = 0; n < node.domain.size(); ++n)
        if (node.domain[n].empty()) throw DomainError("FCS node " + node.key() + " has no reachable private state");
    std::vector<Prescription> out;
    if (node.space.saturated()) throw BudgetExceeded("FCS node " + node.key(), std::numeric_limits<long long>::max(), kDefaultBudget);
    for (std::int64_t g = 0; g < node.space.size(); ++g) out.push_back(node.space.decode(g));
    return out;
}

std::vector<Prescription> enumerate_prescriptions(const std::vector<int>& sizes, const DecPomdpModel& model) {
    std::vector<int> counts(model.num_agents());
    for (int n = 0; n < model.num_agents(); ++n) {
        if (sizes[n] <= 0) throw DomainError("empty label domain for agent " + std::to_string(n));
        counts[n] = model.num_actions(n);
    }
    PrescriptionSpace space(sizes, counts);
    if (space.saturated()) throw BudgetExceeded("label prescription space", std::numeric_limits<long long>::max(), kDefaultBudget);
    std::vector<Prescription> out;
    for (std::int64_t g = 0; g < space.size(); ++g) out.push_back(space.decode(g));
    return out;
}

std::vector<ChildRef> expand_fcs(FcsTree& tree, int id, const Prescription& gamma) {
    std::int64_t g = tree.node(id).space.encode(gamma);
    return tree.expand(id, g);
}

} // namespace ciplan
