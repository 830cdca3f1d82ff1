#include "ciplan/approx_dp.hpp"

#include "ciplan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ciplan {

ExtensionContext make_extension_context(const FcsTree& tree, const PrivateCompression& pc, int id) {
    const FcsNode& node = tree.node(id);
    int N = tree.model().num_agents();
    ExtensionContext ctx{&tree, &pc, id, {}, {}};
    ctx.domain.resize(N);
    ctx.preimage.resize(N);
    for (int n = 0; n < N; ++n) {
        ctx.domain[n] = pc.label_domain(id, n);
        ctx.preimage[n].resize(ctx.domain[n].size());
        for (std::size_t i = 0; i < node.domain[n].size(); ++i) {
            int z = pc.label(id, n, static_cast<int>(i));
            auto pos = std::lower_bound(ctx.domain[n].begin(), ctx.domain[n].end(), z) - ctx.domain[n].begin();
            ctx.preimage[n][pos].push_back(static_cast<int>(i));
        }
    }
    return ctx;
}

Prescription extend_prescription(const ExtensionContext& ctx, const Prescription& lambda) {
    const FcsNode& node = ctx.tree->node(ctx.node);
    int N = static_cast<int>(ctx.domain.size());
    if (static_cast<int>(lambda.actions.size()) != N) throw DomainError("label prescription has wrong agent count");
    Prescription gamma;
    gamma.actions.resize(N);
    for (int n = 0; n < N; ++n) {
        if (lambda.actions[n].size() != ctx.domain[n].size())
            throw DomainError("label prescription does not match the labels at " + node.key());
        gamma.actions[n].assign(node.domain[n].size(), 0);
        for (std::size_t k = 0; k < ctx.domain[n].size(); ++k)
            for (int i : ctx.preimage[n][k]) gamma.actions[n][i] = lambda.actions[n][k];
    }
    return gamma;
}

AspsSolution solve_fcs_asps(FcsTree& tree, const PrivateCompression& pc, const SolveOptions& options) {
    tree.build_full(options.budget);
    auto rec = check_recursive(tree, pc);
    if (!rec.pass)
        throw CompressionError("private compression is not recursive: " + rec.violations.front().edge + ": " +
                               rec.violations.front().detail);
    const DecPomdpModel& model = tree.model();
    int T = model.horizon();
    AspsSolution sol;
    sol.labels = build_label_tree(tree, pc, options.budget);
    const LabelTree& lt = sol.labels;
    sol.value.assign(tree.size(), std::numeric_limits<double>::quiet_NaN());
    sol.lambda.assign(tree.size(), -1);
    sol.policy.choice.assign(tree.size(), -1);
    sol.table.by_time.resize(T);

    for (int t = T; t >= 1; --t) {
        std::vector<int> level;
        for (int id : lt.nodes)
            if (tree.node(id).time == t) level.push_back(id);
        std::vector<std::vector<double>> q(level.size());
        parallel_for(level.size(), [&](std::size_t k) {
            int id = level[k];
            const FcsNode& node = tree.node(id);
            const auto& gammas = lt.gamma[id];
            q[k].resize(gammas.size());
            for (std::size_t l = 0; l < gammas.size(); ++l) {
                double v = immediate_reward(model, node, node.space.decode(gammas[l]));
                if (t < T)
                    for (const auto& c : tree.children(id, gammas[l])) v += c.prob * sol.value[c.child];
                q[k][l] = v;
            }
        });
        for (std::size_t k = 0; k < level.size(); ++k) {
            int id = level[k];
            std::size_t best = 0;
            for (std::size_t l = 1; l < q[k].size(); ++l)
                if (q[k][l] > q[k][best]) best = l;
            sol.value[id] = q[k][best];
            sol.lambda[id] = static_cast<std::int64_t>(best);
            sol.policy.choice[id] = lt.gamma[id][best];
            ValueEntry e{q[k][best], static_cast<std::int64_t>(best), {}};
            if (options.keep_q) e.q = q[k];
            sol.table.by_time[t - 1][tree.node(id).key()] = std::move(e);
        }
    }
    for (int r : tree.roots()) sol.objective += tree.node(r).branch_prob * sol.value[r];
    sol.table.objective = sol.objective;
    return sol;
}

double AscsSolution::at(int t, int label) const {
    if (t < 1 || t > static_cast<int>(value.size())) throw DomainError("time out of range");
    auto it = value[t - 1].find(label);
    if (it == value[t - 1].end())
        throw DomainError("no value for common label " + std::to_string(label) + " at t=" + std::to_string(t));
    return it->second;
}

AscsSolution solve_ascs_asps(FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                             const CommonCompression& cc, const std::string& mu, const SolveOptions& options) {
    tree.build_full(options.budget);
    auto prec = check_recursive(tree, pc);
    if (!prec.pass) throw CompressionError("private compression is not recursive: " + prec.violations.front().edge);
    auto crec = check_recursive(tree, pc, lt, cc);
    if (!crec.pass)
        throw CompressionError("common compression is not recursive: " + crec.violations.front().edge + ": " +
                               crec.violations.front().detail);
    const DecPomdpModel& model = tree.model();
    int T = model.horizon();
    int O0 = model.num_common_obs();
    AscsSolution sol;
    sol.mu = mu;
    sol.value.resize(T);
    sol.lambda.resize(T);
    sol.table.by_time.resize(T);

    auto pre = common_preimages(tree, lt, cc);
    long long evaluations = 0;
    for (int t = T; t >= 1; --t) {
        for (const auto& [tz, members] : pre) {
            if (tz.first != t) continue;
            int z = tz.second;
            auto domain = union_domain(tree, lt, cc, t, z);
            std::vector<int> sizes, counts;
            for (int n = 0; n < model.num_agents(); ++n) {
                sizes.push_back(static_cast<int>(domain[n].size()));
                counts.push_back(model.num_actions(n));
            }
            PrescriptionSpace space(sizes, counts);
            if (space.saturated() || evaluations + space.size() * static_cast<long long>(members.size()) > options.budget)
                throw BudgetExceeded("common label " + std::to_string(z) + " (t=" + std::to_string(t) + ")",
                                     evaluations + space.size() * static_cast<long long>(members.size()), options.budget);
            evaluations += space.size() * static_cast<long long>(members.size());
            double mass = 0;
            for (int id : members) mass += lt.mu[id];
            std::vector<double> r(space.size(), 0.0);
            std::vector<double> o(t < T ? space.size() * O0 : 0, 0.0);
            visit_union_prescriptions(tree, lt, members, domain, [&](std::int64_t l, int id, std::int64_t g) {
                const FcsNode& node = tree.node(id);
                double w = lt.mu[id] / mass;
                r[l] += w * immediate_reward(model, node, node.space.decode(g));
                if (t < T)
                    for (const auto& c : tree.children(id, g)) o[l * O0 + c.common_obs] += w * c.prob;
            });
            std::vector<double> q(space.size());
            for (std::int64_t l = 0; l < space.size(); ++l) {
                double v = r[l];
                if (t < T)
                    for (int x = 0; x < O0; ++x) {
                        double p = o[l * O0 + x];
                        if (p <= 0) continue;
                        auto it = cc.update.find({t, z, l, x});
                        if (it == cc.update.end())
                            throw CompressionError("no common update for label " + std::to_string(z) + ", lambda " +
                                                   std::to_string(l) + ", observation " + std::to_string(x));
                        v += p * sol.at(t + 1, it->second);
                    }
                q[l] = v;
            }
            std::int64_t best = 0;
            for (std::int64_t l = 1; l < space.size(); ++l)
                if (q[l] > q[best]) best = l;
            sol.value[t - 1][z] = q[best];
            sol.lambda[t - 1][z] = best;
            ValueEntry e{q[best], best, {}};
            if (options.keep_q) e.q = q;
            sol.table.by_time[t - 1]["z" + std::to_string(z)] = std::move(e);
        }
    }
    for (int r : tree.roots()) sol.objective += tree.node(r).branch_prob * sol.at(1, cc.labels[r]);
    sol.table.objective = sol.objective;
    return sol;
}

CoordinatorPolicy ascs_policy(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                              const CommonCompression& cc, const AscsSolution& sol) {
    const DecPomdpModel& model = tree.model();
    CoordinatorPolicy policy;
    policy.choice.assign(tree.size(), -1);
    std::map<std::pair<int, int>, std::pair<std::vector<std::vector<int>>, Prescription>> chosen;
    for (int id : lt.nodes) {
        int t = tree.node(id).time;
        int z = cc.labels[id];
        auto it = chosen.find({t, z});
        if (it == chosen.end()) {
            auto domain = union_domain(tree, lt, cc, t, z);
            std::vector<int> sizes, counts;
            for (int n = 0; n < model.num_agents(); ++n) {
                sizes.push_back(static_cast<int>(domain[n].size()));
                counts.push_back(model.num_actions(n));
            }
            PrescriptionSpace space(sizes, counts);
            it = chosen.emplace(std::make_pair(t, z), std::make_pair(domain, space.decode(sol.lambda[t - 1].at(z)))).first;
        }
        const auto& [domain, lambda] = it->second;
        Prescription local;
        local.actions.resize(model.num_agents());
        for (int n = 0; n < model.num_agents(); ++n)
            for (int zl : lt.domain[id][n]) {
                auto pos = std::lower_bound(domain[n].begin(), domain[n].end(), zl) - domain[n].begin();
                local.actions[n].push_back(lambda.actions[n][pos]);
            }
        policy.choice[id] = extend_prescription(tree, pc, id, lt.domain[id], local);
    }
    return policy;
}

} // namespace ciplan
