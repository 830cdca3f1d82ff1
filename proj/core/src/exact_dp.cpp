#include "ciplan/exact_dp.hpp"

#include "ciplan/parallel.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace ciplan {

const ValueEntry& ValueTable::at(int t, const std::string& key) const {
    if (t < 1 || t > static_cast<int>(by_time.size())) throw DomainError("time " + std::to_string(t) + " out of range");
    auto it = by_time[t - 1].find(key);
    if (it == by_time[t - 1].end()) throw DomainError("no value for key '" + key + "' at t=" + std::to_string(t));
    return it->second;
}

bool ValueTable::contains(int t, const std::string& key) const {
    return t >= 1 && t <= static_cast<int>(by_time.size()) && by_time[t - 1].count(key) > 0;
}

std::int64_t CoordinatorPolicy::at(int node) const {
    if (node < 0 || node >= static_cast<int>(choice.size()) || choice[node] < 0)
        throw DomainError("policy undefined at FCS node " + std::to_string(node));
    return choice[node];
}

double immediate_reward(const DecPomdpModel& model, const FcsNode& node, const Prescription& gamma) {
    double r = 0;
    for (const auto& a : node.belief) r += a.prob * model.reward(a.state, joint_action(model, gamma, a.hist));
    return r;
}

FcsSolution solve_fcs_fps(FcsTree& tree, const SolveOptions& options) {
    tree.build_full(options.budget);
    const DecPomdpModel& model = tree.model();
    int T = model.horizon();
    FcsSolution sol;
    sol.value.assign(tree.size(), std::numeric_limits<double>::quiet_NaN());
    sol.policy.choice.assign(tree.size(), -1);
    sol.q.resize(tree.size());
    sol.table.by_time.resize(T);

    for (int t = T; t >= 1; --t) {
        const auto& level = tree.level(t);
        struct Task {
            int node;
            std::int64_t gamma;
        };
        std::vector<Task> tasks;
        for (int id : level) {
            sol.q[id].assign(tree.node(id).space.size(), 0.0);
            for (std::int64_t g = 0; g < tree.node(id).space.size(); ++g) tasks.push_back({id, g});
        }
        parallel_for(tasks.size(), [&](std::size_t i) {
            const FcsNode& node = tree.node(tasks[i].node);
            double q = immediate_reward(model, node, node.space.decode(tasks[i].gamma));
            if (t < T)
                for (const auto& c : tree.children(node.id, tasks[i].gamma)) q += c.prob * sol.value[c.child];
            sol.q[node.id][tasks[i].gamma] = q;
        });
        for (int id : level) {
            const auto& q = sol.q[id];
            std::int64_t best = 0;
            for (std::int64_t g = 1; g < static_cast<std::int64_t>(q.size()); ++g)
                if (q[g] > q[best]) best = g;
            sol.value[id] = q[best];
            sol.policy.choice[id] = best;
            ValueEntry e{q[best], best, {}};
            if (options.keep_q) e.q = q;
            sol.table.by_time[t - 1][tree.node(id).key()] = std::move(e);
        }
    }
    for (int r : tree.roots()) sol.objective += tree.node(r).branch_prob * sol.value[r];
    sol.table.objective = sol.objective;
    return sol;
}

namespace {

struct MassAtom {
    int state;
    std::vector<int> hist;
    double p;
};

using ChildMasses = std::vector<std::pair<int, std::vector<MassAtom>>>;

// Applies gamma at a node to (unnormalized) masses. Returns the expected reward
// and, below the horizon, the masses arriving at each child node.
double forward_step(const FcsTree& tree, int id, std::int64_t gamma, const std::vector<MassAtom>& mass,
                    ChildMasses* next) {
    const DecPomdpModel& model = tree.model();
    const FcsNode& node = tree.node(id);
    Prescription g = node.space.decode(gamma);
    int N = model.num_agents();
    double reward = 0;
    for (const auto& m : mass) reward += m.p * model.reward(m.state, joint_action(model, g, m.hist));
    if (!next || node.time >= model.horizon()) return reward;
    const auto& kids = tree.children(id, gamma);
    next->clear();
    for (const auto& c : kids) next->push_back({c.child, {}});
    for (const auto& m : mass) {
        int ja = joint_action(model, g, m.hist);
        for (const auto& [s2, pt] : model.successors(m.state, ja))
            for (const auto& e : model.emissions(s2)) {
                std::size_t k = 0;
                while (k < kids.size() && kids[k].common_obs != e.common) ++k;
                if (k == kids.size()) continue; // branch below the admissibility threshold
                const FcsNode& child = tree.node(kids[k].child);
                std::vector<int> h(N);
                bool ok = true;
                for (int n = 0; n < N && ok; ++n) {
                    h[n] = child.lift[n][m.hist[n] * model.num_private_obs(n) + model.private_obs_of(e.priv, n)];
                    ok = h[n] >= 0;
                }
                if (ok) (*next)[k].second.push_back({s2, std::move(h), m.p * pt * e.p});
            }
    }
    return reward;
}

// Expected return of masses at a node following a fixed choice function.
double forward_value(const FcsTree& tree, int id, const std::vector<MassAtom>& mass,
                     const std::function<std::int64_t(int)>& choose, std::int64_t first = -1) {
    std::int64_t g = first >= 0 ? first : choose(id);
    ChildMasses next;
    double v = forward_step(tree, id, g, mass, &next);
    for (const auto& [child, m] : next)
        if (!m.empty()) v += forward_value(tree, child, m, choose);
    return v;
}

} // namespace

double supervisor_q(const FcsTree& tree, const FcsSolution& sol, int id, const std::vector<int>& hist,
                    std::int64_t gamma) {
    const FcsNode& node = tree.node(id);
    int f = node.find_fps(hist);
    if (f < 0) throw DomainError("joint history is not admissible at FCS node " + node.key());
    if (gamma < 0 || gamma >= node.space.size()) throw DomainError("prescription index out of range at " + node.key());
    const FpsRange& r = node.fps[f];
    std::vector<MassAtom> mass;
    for (int i = r.begin; i < r.end; ++i) mass.push_back({node.belief[i].state, hist, node.belief[i].prob / r.prob});
    return forward_value(tree, id, mass, [&](int n) { return sol.policy.at(n); }, gamma);
}

double supervisor_v(const FcsTree& tree, const FcsSolution& sol, int id, const std::vector<int>& hist) {
    return supervisor_q(tree, sol, id, hist, sol.policy.at(id));
}

std::vector<double> evaluate_policy(const FcsTree& tree, const CoordinatorPolicy& policy) {
    const DecPomdpModel& model = tree.model();
    std::vector<double> value(tree.size(), std::numeric_limits<double>::quiet_NaN());
    std::function<double(int)> eval = [&](int id) {
        const FcsNode& node = tree.node(id);
        std::int64_t g = policy.at(id);
        double v = immediate_reward(model, node, node.space.decode(g));
        if (node.time < model.horizon())
            for (const auto& c : tree.children(id, g)) v += c.prob * eval(c.child);
        value[id] = v;
        return v;
    };
    for (int r : tree.roots()) eval(r);
    return value;
}

double evaluate_policy_forward(const FcsTree& tree, const CoordinatorPolicy& policy) {
    const DecPomdpModel& model = tree.model();
    int N = model.num_agents();
    double total = 0;
    // start from the prior rather than the stored root beliefs
    for (int r : tree.roots()) {
        const FcsNode& root = tree.node(r);
        std::vector<MassAtom> mass;
        for (int s = 0; s < model.num_states(); ++s)
            for (const auto& e : model.emissions(s)) {
                if (e.common != root.common_obs || model.initial(s) <= 0) continue;
                std::vector<int> h(N);
                bool ok = true;
                for (int n = 0; n < N && ok; ++n) {
                    h[n] = root.find(n, PrivateHistory{{model.private_obs_of(e.priv, n)}});
                    ok = h[n] >= 0;
                }
                if (ok) mass.push_back({s, h, model.initial(s) * e.p});
            }
        total += forward_value(tree, r, mass, [&](int n) { return policy.at(n); });
    }
    return total;
}

std::int64_t count_policies(const FcsTree& tree) {
    constexpr std::int64_t cap = std::numeric_limits<std::int64_t>::max();
    const DecPomdpModel& model = tree.model();
    std::function<std::int64_t(int)> count = [&](int id) -> std::int64_t {
        const FcsNode& node = tree.node(id);
        if (node.space.saturated()) return cap;
        if (node.time >= model.horizon()) return node.space.size();
        std::int64_t total = 0;
        for (std::int64_t g = 0; g < node.space.size(); ++g) {
            std::int64_t prod = 1;
            for (const auto& c : tree.children(id, g)) {
                std::int64_t k = count(c.child);
                if (k != 0 && prod > cap / k) return cap;
                prod *= k;
            }
            if (total > cap - prod) return cap;
            total += prod;
        }
        return total;
    };
    std::int64_t total = 0;
    for (int r : tree.roots()) {
        std::int64_t k = count(r);
        if (total > cap - k) return cap;
        total += k;
    }
    return total;
}

double brute_force_value(FcsTree& tree, long long budget) {
    tree.build_full(budget);
    std::int64_t policies = count_policies(tree);
    if (policies > budget) throw BudgetExceeded("policy enumeration", policies, budget);
    const DecPomdpModel& model = tree.model();
    int N = model.num_agents();

    struct Pending {
        int node;
        std::vector<MassAtom> mass;
    };
    // Roots have disjoint trajectory sets, so each root's best policy is chosen independently.
    double total = 0;
    for (int r : tree.roots()) {
        const FcsNode& root = tree.node(r);
        std::vector<MassAtom> mass;
        for (int s = 0; s < model.num_states(); ++s)
            for (const auto& e : model.emissions(s)) {
                if (e.common != root.common_obs || model.initial(s) <= 0) continue;
                std::vector<int> h(N);
                bool ok = true;
                for (int n = 0; n < N && ok; ++n) {
                    h[n] = root.find(n, PrivateHistory{{model.private_obs_of(e.priv, n)}});
                    ok = h[n] >= 0;
                }
                if (ok) mass.push_back({s, h, model.initial(s) * e.p});
            }
        double best = -std::numeric_limits<double>::infinity();
        std::vector<Pending> stack{{r, std::move(mass)}};
        std::function<void(double)> rec = [&](double acc) {
            if (stack.empty()) {
                best = std::max(best, acc);
                return;
            }
            Pending top = std::move(stack.back());
            stack.pop_back();
            const FcsNode& node = tree.node(top.node);
            ChildMasses next;
            for (std::int64_t g = 0; g < node.space.size(); ++g) {
                double reward = forward_step(tree, top.node, g, top.mass, &next);
                std::size_t depth = stack.size();
                if (node.time < model.horizon())
                    for (auto& [child, m] : next) stack.push_back({child, std::move(m)});
                rec(acc + reward);
                stack.resize(depth);
            }
            stack.push_back(std::move(top));
        };
        rec(0.0);
        total += best;
    }
    return total;
}

std::vector<double> next_step_via_prescription(const FcsTree& tree, int id, const std::vector<int>& hist,
                                               std::int64_t gamma) {
    const DecPomdpModel& model = tree.model();
    const FcsNode& node = tree.node(id);
    int f = node.find_fps(hist);
    if (f < 0) throw DomainError("joint history is not admissible at FCS node " + node.key());
    int N = model.num_agents();
    int JP = model.num_joint_private_obs();
    std::vector<double> out(static_cast<std::size_t>(model.num_states()) * JP, 0.0);
    for (const auto& c : tree.children(id, gamma)) {
        const FcsNode& child = tree.node(c.child);
        for (int jp = 0; jp < JP; ++jp) {
            std::vector<int> h(N);
            bool ok = true;
            for (int n = 0; n < N && ok; ++n) {
                h[n] = child.lift[n][hist[n] * model.num_private_obs(n) + model.private_obs_of(jp, n)];
                ok = h[n] >= 0;
            }
            if (!ok) continue;
            int cf = child.find_fps(h);
            if (cf < 0) continue;
            for (int i = child.fps[cf].begin; i < child.fps[cf].end; ++i)
                out[child.belief[i].state * JP + jp] += c.prob * child.belief[i].prob / node.fps[f].prob;
        }
    }
    return out;
}

std::vector<double> next_step_via_action(const FcsTree& tree, int id, const std::vector<int>& hist, int ja) {
    const DecPomdpModel& model = tree.model();
    const FcsNode& node = tree.node(id);
    int f = node.find_fps(hist);
    if (f < 0) throw DomainError("joint history is not admissible at FCS node " + node.key());
    int JP = model.num_joint_private_obs();
    std::vector<double> out(static_cast<std::size_t>(model.num_states()) * JP, 0.0);
    const FpsRange& r = node.fps[f];
    for (int i = r.begin; i < r.end; ++i) {
        double ps = node.belief[i].prob / r.prob;
        for (const auto& [s2, pt] : model.successors(node.belief[i].state, ja))
            for (const auto& e : model.emissions(s2)) out[s2 * JP + e.priv] += ps * pt * e.p;
    }
    return out;
}

} // namespace ciplan
