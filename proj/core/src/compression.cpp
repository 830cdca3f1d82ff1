#include "ciplan/compression.hpp"

#include "ciplan/belief.hpp"
#include "ciplan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace ciplan {

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size())
        throw DomainError("distributions over different universes (" + std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()) + ")");
    double d = 0;
    for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
    return d / 2;
}

std::vector<int> PrivateCompression::label_domain(int node, int agent) const {
    std::vector<int> d = labels[node][agent];
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

std::vector<std::vector<int>> PrivateCompression::alphabet(const FcsTree& tree) const {
    int N = tree.model().num_agents();
    int T = tree.model().horizon();
    std::vector<std::set<int>> sets(static_cast<std::size_t>(N) * T);
    for (int id = 0; id < static_cast<int>(labels.size()) && id < tree.size(); ++id) {
        int t = tree.node(id).time;
        for (int n = 0; n < N; ++n)
            for (int z : labels[id][n]) sets[n * T + t - 1].insert(z);
    }
    std::vector<std::vector<int>> out;
    for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
    return out;
}

namespace {

int position(const std::vector<int>& sorted, int value) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
    if (it == sorted.end() || *it != value) return -1;
    return static_cast<int>(it - sorted.begin());
}

PrescriptionSpace label_space(const DecPomdpModel& model, const std::vector<std::vector<int>>& domain) {
    std::vector<int> sizes, counts;
    for (int n = 0; n < model.num_agents(); ++n) {
        sizes.push_back(static_cast<int>(domain[n].size()));
        counts.push_back(model.num_actions(n));
    }
    return PrescriptionSpace(sizes, counts);
}

// Restricts a prescription over a union domain to a sub-domain.
Prescription restrict_to(const Prescription& lambda, const std::vector<std::vector<int>>& from,
                         const std::vector<std::vector<int>>& to) {
    Prescription out;
    out.actions.resize(to.size());
    for (std::size_t n = 0; n < to.size(); ++n)
        for (int z : to[n]) out.actions[n].push_back(lambda.actions[n][position(from[n], z)]);
    return out;
}

// Parent domain index and own observation of each history at a non-root node.
std::pair<int, int> parent_of(const FcsTree& tree, const FcsNode& child, int agent, int index) {
    const FcsNode& parent = tree.node(child.parent);
    int On = tree.model().num_private_obs(agent);
    const auto& lift = child.lift[agent];
    for (std::size_t k = 0; k < lift.size(); ++k)
        if (lift[k] == index) return {static_cast<int>(k) / On, static_cast<int>(k) % On};
    throw DomainError("history " + child.domain[agent][index].str() + " has no parent at " + parent.key());
}

} // namespace

std::int64_t extend_prescription(const FcsTree& tree, const PrivateCompression& pc, int id,
                                 const std::vector<std::vector<int>>& domain, const Prescription& lambda) {
    const FcsNode& node = tree.node(id);
    int N = tree.model().num_agents();
    Prescription gamma;
    gamma.actions.resize(N);
    for (int n = 0; n < N; ++n) {
        if (lambda.actions[n].size() != domain[n].size()) throw DomainError("label prescription domain mismatch");
        for (std::size_t i = 0; i < node.domain[n].size(); ++i) {
            int pos = position(domain[n], pc.label(id, n, static_cast<int>(i)));
            if (pos < 0)
                throw DomainError("label " + std::to_string(pc.label(id, n, static_cast<int>(i))) +
                                  " outside the prescription's alphabet at " + node.key());
            gamma.actions[n].push_back(lambda.actions[n][pos]);
        }
    }
    return node.space.encode(gamma);
}

LabelTree build_label_tree(FcsTree& tree, const PrivateCompression& pc, long long budget) {
    tree.build_full(budget);
    const DecPomdpModel& model = tree.model();
    int N = model.num_agents();
    LabelTree lt;
    int size = tree.size();
    lt.member.assign(size, 0);
    lt.domain.resize(size);
    lt.gamma.resize(size);
    lt.mu.assign(size, 0.0);
    if (static_cast<int>(pc.labels.size()) != size) throw CompressionError("private compression does not cover the FCS tree");
    std::vector<int> frontier = tree.roots();
    for (int r : frontier) {
        lt.member[r] = 1;
        lt.mu[r] = tree.node(r).branch_prob;
    }
    long long count = 0;
    while (!frontier.empty()) {
        std::vector<int> next;
        for (int id : frontier) {
            const FcsNode& node = tree.node(id);
            lt.domain[id].resize(N);
            for (int n = 0; n < N; ++n) lt.domain[id][n] = pc.label_domain(id, n);
            PrescriptionSpace space = label_space(model, lt.domain[id]);
            if (space.saturated() || count + space.size() > budget)
                throw BudgetExceeded("FCS node " + node.key(), count + space.size(), budget);
            count += space.size();
            for (std::int64_t l = 0; l < space.size(); ++l) {
                std::int64_t g = extend_prescription(tree, pc, id, lt.domain[id], space.decode(l));
                lt.gamma[id].push_back(g);
                if (node.time >= model.horizon()) continue;
                for (const auto& c : tree.children(id, g)) {
                    if (!lt.member[c.child]) next.push_back(c.child);
                    lt.member[c.child] = 1;
                    lt.mu[c.child] += lt.mu[id] / static_cast<double>(space.size()) * c.prob;
                }
            }
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
    }
    for (int id = 0; id < size; ++id)
        if (lt.member[id]) lt.nodes.push_back(id);
    return lt;
}

nlohmann::json RecursionReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& v : violations) rows.push_back({{"edge", v.edge}, {"detail", v.detail}});
    return {{"pass", pass}, {"violations", rows}};
}

RecursionReport check_recursive(const FcsTree& tree, const PrivateCompression& pc) {
    RecursionReport rep;
    const DecPomdpModel& model = tree.model();
    int N = model.num_agents();
    auto fail = [&](std::string edge, std::string detail) {
        rep.pass = false;
        if (rep.violations.size() < 1000) rep.violations.push_back({std::move(edge), std::move(detail)});
    };
    if (static_cast<int>(pc.labels.size()) != tree.size()) {
        fail("tree", "label table covers " + std::to_string(pc.labels.size()) + " of " + std::to_string(tree.size()) +
                         " FCS nodes");
        return rep;
    }
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& node = tree.node(id);
        for (int n = 0; n < N; ++n)
            if (pc.labels[id].size() != static_cast<std::size_t>(N) || pc.labels[id][n].size() != node.domain[n].size()) {
                fail(node.key(), "label table not total for agent " + std::to_string(n));
                return rep;
            }
    }
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& child = tree.node(id);
        if (child.parent < 0) continue;
        for (int n = 0; n < N; ++n) {
            int On = model.num_private_obs(n);
            for (std::size_t k = 0; k < child.lift[n].size(); ++k) {
                int ci = child.lift[n][k];
                if (ci < 0) continue;
                int p = static_cast<int>(k) / On;
                int o = static_cast<int>(k) % On;
                PrivateUpdateKey key{n, id, pc.label(child.parent, n, p), o};
                int actual = pc.label(id, n, ci);
                auto it = pc.update.find(key);
                std::string edge = tree.node(child.parent).key() + " -> " + child.key() + " agent " + std::to_string(n) +
                                   " history " + child.domain[n][ci].str();
                if (it == pc.update.end())
                    fail(edge, "no update for label " + std::to_string(key.label) + " and observation " + std::to_string(o));
                else if (it->second != actual)
                    fail(edge, "update gives " + std::to_string(it->second) + ", table has " + std::to_string(actual));
            }
        }
    }
    return rep;
}

std::vector<std::vector<int>> union_domain(const FcsTree& tree, const LabelTree& lt, const CommonCompression& cc,
                                           int time, int label) {
    int N = tree.model().num_agents();
    std::vector<std::set<int>> sets(N);
    for (int id : lt.nodes)
        if (tree.node(id).time == time && cc.labels[id] == label)
            for (int n = 0; n < N; ++n) sets[n].insert(lt.domain[id][n].begin(), lt.domain[id][n].end());
    std::vector<std::vector<int>> out;
    for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
    return out;
}

std::map<std::pair<int, int>, std::vector<int>> common_preimages(const FcsTree& tree, const LabelTree& lt,
                                                                 const CommonCompression& cc) {
    std::map<std::pair<int, int>, std::vector<int>> out;
    for (int id : lt.nodes) out[{tree.node(id).time, cc.labels[id]}].push_back(id);
    return out;
}

void visit_union_prescriptions(const FcsTree& tree, const LabelTree& lt, const std::vector<int>& members,
                               const std::vector<std::vector<int>>& domain,
                               const std::function<void(std::int64_t, int, std::int64_t)>& f) {
    const DecPomdpModel& model = tree.model();
    PrescriptionSpace space = label_space(model, domain);
    if (space.saturated()) throw BudgetExceeded("common label prescription space", std::numeric_limits<long long>::max(), kDefaultBudget);
    std::vector<PrescriptionSpace> local;
    for (int id : members) local.push_back(label_space(model, lt.domain[id]));
    for (std::int64_t l = 0; l < space.size(); ++l) {
        Prescription lambda = space.decode(l);
        for (std::size_t k = 0; k < members.size(); ++k) {
            std::int64_t ll = local[k].encode(restrict_to(lambda, domain, lt.domain[members[k]]));
            f(l, members[k], lt.gamma[members[k]][ll]);
        }
    }
}

RecursionReport check_recursive(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                                const CommonCompression& cc) {
    (void)pc;
    RecursionReport rep;
    auto fail = [&](std::string edge, std::string detail) {
        rep.pass = false;
        if (rep.violations.size() < 1000) rep.violations.push_back({std::move(edge), std::move(detail)});
    };
    if (static_cast<int>(cc.labels.size()) != tree.size()) {
        fail("tree", "common label table does not match the FCS tree");
        return rep;
    }
    for (int id : lt.nodes)
        if (cc.labels[id] < 0) fail(tree.node(id).key(), "no common label");
    if (!rep.pass) return rep;
    int T = tree.model().horizon();
    for (const auto& [tz, members] : common_preimages(tree, lt, cc)) {
        auto [t, z] = tz;
        if (t >= T) continue;
        auto domain = union_domain(tree, lt, cc, t, z);
        visit_union_prescriptions(tree, lt, members, domain, [&](std::int64_t l, int id, std::int64_t g) {
            for (const auto& c : tree.children(id, g)) {
                CommonUpdateKey key{t, z, l, c.common_obs};
                int actual = cc.labels[c.child];
                auto it = cc.update.find(key);
                std::string edge = tree.node(id).key() + " -> " + tree.node(c.child).key() + " (label " +
                                   std::to_string(z) + ", lambda " + std::to_string(l) + ")";
                if (it == cc.update.end()) fail(edge, "no common update");
                else if (it->second != actual)
                    fail(edge, "update gives " + std::to_string(it->second) + ", table has " + std::to_string(actual));
            }
        });
    }
    return rep;
}

namespace {

struct PrivateRow {
    std::vector<double> reward; // raw discrepancy per joint action
    std::vector<double> obs;    // raw TV per joint action (empty at the horizon)
};

// Discrepancies of every admissible joint history at a node against its label mixture.
std::vector<PrivateRow> private_rows(const FcsTree& tree, const PrivateCompression& pc, int id) {
    const DecPomdpModel& model = tree.model();
    const FcsNode& node = tree.node(id);
    int N = model.num_agents();
    int JA = model.num_joint_actions();
    bool last = node.time >= model.horizon();
    int JO = model.num_common_obs() * model.num_joint_private_obs();
    std::size_t F = node.fps.size();
    std::vector<std::vector<double>> r(F, std::vector<double>(JA, 0.0));
    std::vector<std::vector<double>> o(F, std::vector<double>(last ? 0 : static_cast<std::size_t>(JA) * JO, 0.0));
    for (std::size_t f = 0; f < F; ++f) {
        const FpsRange& rg = node.fps[f];
        for (int i = rg.begin; i < rg.end; ++i) {
            double ps = node.belief[i].prob / rg.prob;
            int s = node.belief[i].state;
            for (int ja = 0; ja < JA; ++ja) {
                r[f][ja] += ps * model.reward(s, ja);
                if (last) continue;
                for (const auto& [s2, pt] : model.successors(s, ja))
                    for (const auto& e : model.emissions(s2))
                        o[f][static_cast<std::size_t>(ja) * JO + e.common * model.num_joint_private_obs() + e.priv] +=
                            ps * pt * e.p;
            }
        }
    }
    std::map<std::vector<int>, std::vector<std::size_t>> groups;
    std::vector<std::vector<int>> key(F);
    for (std::size_t f = 0; f < F; ++f) {
        for (int n = 0; n < N; ++n) key[f].push_back(pc.label(id, n, node.fps[f].hist[n]));
        groups[key[f]].push_back(f);
    }
    std::vector<PrivateRow> rows(F);
    for (const auto& [k, members] : groups) {
        double mass = 0;
        std::vector<double> rm(JA, 0.0), om(o[members[0]].size(), 0.0);
        for (auto f : members) {
            double w = node.fps[f].prob;
            mass += w;
            for (int ja = 0; ja < JA; ++ja) rm[ja] += w * r[f][ja];
            for (std::size_t x = 0; x < om.size(); ++x) om[x] += w * o[f][x];
        }
        for (auto& v : rm) v /= mass;
        for (auto& v : om) v /= mass;
        for (auto f : members) {
            rows[f].reward.resize(JA);
            for (int ja = 0; ja < JA; ++ja) rows[f].reward[ja] = std::abs(r[f][ja] - rm[ja]);
            if (last) continue;
            rows[f].obs.resize(JA);
            for (int ja = 0; ja < JA; ++ja) {
                double d = 0;
                for (int x = 0; x < JO; ++x) d += std::abs(o[f][static_cast<std::size_t>(ja) * JO + x] - om[static_cast<std::size_t>(ja) * JO + x]);
                rows[f].obs[ja] = d / 2;
            }
        }
    }
    return rows;
}

} // namespace

MeasuredParams measure_private(const FcsTree& tree, const PrivateCompression& pc) {
    auto rec = check_recursive(tree, pc);
    if (!rec.pass)
        throw CompressionError("private compression is not recursive: " + rec.violations.front().edge + ": " +
                               rec.violations.front().detail);
    std::vector<std::vector<PrivateRow>> all(tree.size());
    parallel_for(all.size(), [&](std::size_t id) { all[id] = private_rows(tree, pc, static_cast<int>(id)); });
    MeasuredParams m;
    double sup_r = 0, sup_o = 0;
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& node = tree.node(id);
        for (std::size_t f = 0; f < all[id].size(); ++f) {
            const auto& row = all[id][f];
            for (std::size_t ja = 0; ja < row.reward.size(); ++ja)
                if (row.reward[ja] > sup_r) {
                    sup_r = row.reward[ja];
                    m.eps_p_witness = {node.time, id, node.key(), node.fps[f].hist, static_cast<std::int64_t>(ja), -1, sup_r};
                }
            for (std::size_t ja = 0; ja < row.obs.size(); ++ja)
                if (row.obs[ja] > sup_o) {
                    sup_o = row.obs[ja];
                    m.delta_p_witness = {node.time, id, node.key(), node.fps[f].hist, static_cast<std::int64_t>(ja), -1, sup_o};
                }
        }
    }
    m.eps_p = 4 * sup_r;
    m.delta_p = 8 * sup_o;
    return m;
}

std::pair<double, double> private_discrepancy(const FcsTree& tree, const PrivateCompression& pc, int id,
                                              const std::vector<int>& hist, int ja) {
    const FcsNode& node = tree.node(id);
    int f = node.find_fps(hist);
    if (f < 0) throw DomainError("joint history not admissible at " + node.key());
    auto rows = private_rows(tree, pc, id);
    return {rows[f].reward.at(ja), rows[f].obs.empty() ? 0.0 : rows[f].obs.at(ja)};
}

namespace {

struct CommonRow {
    int node;
    std::int64_t lambda;
    double reward;
    double obs;
};

std::vector<CommonRow> common_rows(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                                   const CommonCompression& cc, int t, int z, const std::vector<int>& members) {
    const DecPomdpModel& model = tree.model();
    bool last = t >= model.horizon();
    int O0 = model.num_common_obs();
    auto domain = union_domain(tree, lt, cc, t, z);
    std::vector<CommonRow> rows;
    std::vector<double> r(members.size());
    std::vector<std::vector<double>> o(members.size());
    std::size_t k = 0;
    std::int64_t current = -1;
    auto flush = [&] {
        if (current < 0) return;
        double mass = 0, rm = 0;
        std::vector<double> om(O0, 0.0);
        for (std::size_t i = 0; i < members.size(); ++i) {
            double w = lt.mu[members[i]];
            mass += w;
            rm += w * r[i];
            for (int x = 0; x < O0; ++x) om[x] += w * o[i][x];
        }
        rm /= mass;
        for (auto& v : om) v /= mass;
        for (std::size_t i = 0; i < members.size(); ++i)
            rows.push_back({members[i], current, std::abs(r[i] - rm), last ? 0.0 : tv_distance(o[i], om)});
    };
    visit_union_prescriptions(tree, lt, members, domain, [&](std::int64_t l, int id, std::int64_t g) {
        if (l != current) {
            flush();
            current = l;
            k = 0;
        }
        const FcsNode& node = tree.node(id);
        r[k] = immediate_reward(model, node, node.space.decode(g));
        o[k].assign(O0, 0.0);
        if (!last)
            for (const auto& c : tree.children(id, g)) o[k][c.common_obs] += c.prob;
        ++k;
    });
    flush();
    (void)pc;
    return rows;
}

} // namespace

MeasuredParams measure_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                              const CommonCompression& cc, const std::string& mu) {
    auto rec = check_recursive(tree, pc, lt, cc);
    if (!rec.pass)
        throw CompressionError("common compression is not recursive: " + rec.violations.front().edge + ": " +
                               rec.violations.front().detail);
    auto pre = common_preimages(tree, lt, cc);
    std::vector<std::pair<std::pair<int, int>, std::vector<int>>> groups(pre.begin(), pre.end());
    std::vector<std::vector<CommonRow>> all(groups.size());
    parallel_for(groups.size(), [&](std::size_t i) {
        all[i] = common_rows(tree, pc, lt, cc, groups[i].first.first, groups[i].first.second, groups[i].second);
    });
    MeasuredParams m;
    m.mu = mu;
    double sup_r = 0, sup_o = 0;
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (const auto& row : all[i]) {
            const FcsNode& node = tree.node(row.node);
            if (row.reward > sup_r) {
                sup_r = row.reward;
                m.eps_c_witness = {node.time, row.node, node.key(), {}, row.lambda, groups[i].first.second, sup_r};
            }
            if (row.obs > sup_o) {
                sup_o = row.obs;
                m.delta_c_witness = {node.time, row.node, node.key(), {}, row.lambda, groups[i].first.second, sup_o};
            }
        }
    m.eps_c = sup_r;
    m.delta_c = 2 * sup_o;
    return m;
}

std::pair<double, double> common_discrepancy(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                                             const CommonCompression& cc, int id, std::int64_t lambda) {
    int t = tree.node(id).time;
    int z = cc.labels.at(id);
    auto pre = common_preimages(tree, lt, cc);
    for (const auto& row : common_rows(tree, pc, lt, cc, t, z, pre.at({t, z})))
        if (row.node == id && row.lambda == lambda) return {row.reward, row.obs};
    throw DomainError("no common row for node " + tree.node(id).key() + " and lambda " + std::to_string(lambda));
}

void derive_private_updates(const FcsTree& tree, PrivateCompression& pc) {
    const DecPomdpModel& model = tree.model();
    pc.update.clear();
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& child = tree.node(id);
        if (child.parent < 0) continue;
        for (int n = 0; n < model.num_agents(); ++n) {
            int On = model.num_private_obs(n);
            for (std::size_t k = 0; k < child.lift[n].size(); ++k) {
                int ci = child.lift[n][k];
                if (ci < 0) continue;
                PrivateUpdateKey key{n, id, pc.label(child.parent, n, static_cast<int>(k) / On), static_cast<int>(k) % On};
                pc.update.emplace(key, pc.label(id, n, ci));
            }
        }
    }
}

namespace {

PrivateCompression shaped(const FcsTree& tree, std::string name) {
    PrivateCompression pc;
    pc.name = std::move(name);
    pc.labels.resize(tree.size());
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& node = tree.node(id);
        for (const auto& d : node.domain) pc.labels[id].emplace_back(d.size(), 0);
    }
    return pc;
}

} // namespace

PrivateCompression identity_private(FcsTree& tree, long long budget) {
    tree.build_full(budget);
    PrivateCompression pc = shaped(tree, "identity");
    for (auto& node : pc.labels)
        for (auto& agent : node) std::iota(agent.begin(), agent.end(), 0);
    derive_private_updates(tree, pc);
    return pc;
}

PrivateCompression constant_private(FcsTree& tree, long long budget) {
    tree.build_full(budget);
    PrivateCompression pc = shaped(tree, "constant");
    derive_private_updates(tree, pc);
    return pc;
}

PrivateCompression build_greedy(FcsTree& tree, double tol_r, double tol_o, long long budget) {
    tree.build_full(budget);
    const DecPomdpModel& model = tree.model();
    int N = model.num_agents();
    int T = model.horizon();
    int JA = model.num_joint_actions();
    int JO = model.num_common_obs() * model.num_joint_private_obs();
    double tr = std::max(tol_r, kEqual);
    double to = std::max(tol_o, kEqual);
    PrivateCompression pc = shaped(tree, "greedy");

    for (int t = T; t >= 1; --t) {
        std::vector<int> level;
        for (int id = 0; id < tree.size(); ++id)
            if (tree.node(id).time == t) level.push_back(id);
        parallel_for(level.size(), [&](std::size_t li) {
            int id = level[li];
            const FcsNode& node = tree.node(id);
            bool last = t >= T;
            std::size_t F = node.fps.size();
            // one-step statistics per admissible joint history
            std::vector<std::vector<double>> r(F, std::vector<double>(JA, 0.0));
            std::vector<std::vector<double>> o(F, std::vector<double>(last ? 0 : static_cast<std::size_t>(JA) * JO, 0.0));
            for (std::size_t f = 0; f < F; ++f) {
                const FpsRange& rg = node.fps[f];
                for (int i = rg.begin; i < rg.end; ++i) {
                    double ps = node.belief[i].prob / rg.prob;
                    int s = node.belief[i].state;
                    for (int ja = 0; ja < JA; ++ja) {
                        r[f][ja] += ps * model.reward(s, ja);
                        if (last) continue;
                        for (const auto& [s2, pt] : model.successors(s, ja))
                            for (const auto& e : model.emissions(s2))
                                o[f][static_cast<std::size_t>(ja) * JO + e.common * model.num_joint_private_obs() + e.priv] +=
                                    ps * pt * e.p;
                    }
                }
            }
            for (int n = 0; n < N; ++n) {
                std::size_t D = node.domain[n].size();
                // other-agent coordinates: mixed radix over the other agents' domains
                long long combos = 1;
                for (int m = 0; m < N; ++m)
                    if (m != n) combos *= static_cast<long long>(node.domain[m].size());
                std::vector<std::vector<int>> row(D, std::vector<int>(combos, -1));
                for (std::size_t f = 0; f < F; ++f) {
                    long long c = 0;
                    for (int m = 0; m < N; ++m)
                        if (m != n) c = c * static_cast<long long>(node.domain[m].size()) + node.fps[f].hist[m];
                    row[node.fps[f].hist[n]][c] = static_cast<int>(f);
                }
                // closure: child labels for every prescription, child and own observation
                std::vector<std::vector<int>> closure(D);
                if (!last) {
                    int On = model.num_private_obs(n);
                    for (std::int64_t g = 0; g < node.space.size(); ++g)
                        for (const auto& c : tree.children(id, g)) {
                            const FcsNode& child = tree.node(c.child);
                            for (std::size_t p = 0; p < D; ++p)
                                for (int ob = 0; ob < On; ++ob) {
                                    int ci = child.lift[n][p * On + ob];
                                    closure[p].push_back(ci < 0 ? -1 : pc.labels[c.child][n][ci]);
                                }
                        }
                }
                auto compatible = [&](std::size_t a, std::size_t b) {
                    if (closure[a] != closure[b]) return false;
                    for (long long c = 0; c < combos; ++c) {
                        int fa = row[a][c], fb = row[b][c];
                        if ((fa < 0) != (fb < 0)) return false;
                        if (fa < 0) continue;
                        for (int ja = 0; ja < JA; ++ja) {
                            if (std::abs(r[fa][ja] - r[fb][ja]) > tr) return false;
                            if (last) continue;
                            double d = 0;
                            for (int x = 0; x < JO; ++x)
                                d += std::abs(o[fa][static_cast<std::size_t>(ja) * JO + x] - o[fb][static_cast<std::size_t>(ja) * JO + x]);
                            if (d / 2 > to) return false;
                        }
                    }
                    return true;
                };
                std::vector<std::size_t> reps;
                for (std::size_t i = 0; i < D; ++i) {
                    std::size_t b = 0;
                    while (b < reps.size() && !compatible(i, reps[b])) ++b;
                    if (b == reps.size()) reps.push_back(i);
                    pc.labels[id][n][i] = static_cast<int>(b);
                }
            }
        });
    }
    derive_private_updates(tree, pc);
    return pc;
}

PrivateCompression build_exact_private(FcsTree& tree, long long budget) {
    PrivateCompression pc = build_greedy(tree, 0.0, 0.0, budget);
    pc.name = "exact";
    return pc;
}

PrivateCompression random_private(FcsTree& tree, std::mt19937_64& rng, int max_labels, long long budget) {
    tree.build_full(budget);
    const DecPomdpModel& model = tree.model();
    PrivateCompression pc = shaped(tree, "random");
    std::uniform_int_distribution<int> pick(0, std::max(1, max_labels) - 1);
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& node = tree.node(id);
        for (int n = 0; n < model.num_agents(); ++n)
            for (std::size_t i = 0; i < node.domain[n].size(); ++i) {
                if (node.parent < 0) {
                    pc.labels[id][n][i] = pick(rng);
                    continue;
                }
                auto [p, o] = parent_of(tree, node, n, static_cast<int>(i));
                PrivateUpdateKey key{n, id, pc.labels[node.parent][n][p], o};
                auto it = pc.update.find(key);
                if (it == pc.update.end()) it = pc.update.emplace(key, pick(rng)).first;
                pc.labels[id][n][i] = it->second;
            }
    }
    return pc;
}

bool refine_private(const FcsTree& tree, PrivateCompression& pc, std::mt19937_64& rng) {
    const DecPomdpModel& model = tree.model();
    int N = model.num_agents();
    struct Candidate {
        int node, agent, label;
        std::vector<std::vector<int>> groups; // member indices per update key
    };
    std::vector<Candidate> cands;
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& node = tree.node(id);
        for (int n = 0; n < N; ++n) {
            std::map<int, std::map<std::pair<int, int>, std::vector<int>>> by_label;
            for (std::size_t i = 0; i < node.domain[n].size(); ++i) {
                std::pair<int, int> key{-1, static_cast<int>(i)};
                if (node.parent >= 0) {
                    auto [p, o] = parent_of(tree, node, n, static_cast<int>(i));
                    key = {pc.labels[node.parent][n][p], o};
                }
                by_label[pc.labels[id][n][i]][key].push_back(static_cast<int>(i));
            }
            for (auto& [z, groups] : by_label)
                if (groups.size() >= 2) {
                    Candidate c{id, n, z, {}};
                    for (auto& [k, g] : groups) c.groups.push_back(g);
                    cands.push_back(std::move(c));
                }
        }
    }
    if (cands.empty()) return false;
    const Candidate& c = cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
    const FcsNode& node = tree.node(c.node);
    int fresh = 0;
    for (int id = 0; id < tree.size(); ++id)
        if (tree.node(id).time == node.time)
            for (int z : pc.labels[id][c.agent]) fresh = std::max(fresh, z + 1);
    std::size_t moved = std::uniform_int_distribution<std::size_t>(0, c.groups.size() - 1)(rng);
    for (int i : c.groups[moved]) pc.labels[c.node][c.agent][i] = fresh;
    if (node.parent >= 0) {
        auto [p, o] = parent_of(tree, node, c.agent, c.groups[moved].front());
        pc.update[{c.agent, c.node, pc.labels[node.parent][c.agent][p], o}] = fresh;
    }
    std::vector<std::pair<PrivateUpdateKey, int>> added;
    for (const auto& [k, v] : pc.update)
        if (k.agent == c.agent && k.label == c.label && tree.node(k.child).parent == c.node)
            added.push_back({{k.agent, k.child, fresh, k.obs}, v});
    for (const auto& [k, v] : added) pc.update[k] = v;
    pc.name = pc.name.find("+refined") == std::string::npos ? pc.name + "+refined" : pc.name;
    return true;
}

namespace {

CommonCompression shaped_common(const FcsTree& tree, const LabelTree& lt, std::string name) {
    CommonCompression cc;
    cc.name = std::move(name);
    cc.labels.assign(tree.size(), -1);
    (void)lt;
    return cc;
}

} // namespace

void derive_common_updates(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt, CommonCompression& cc) {
    (void)pc;
    cc.update.clear();
    int T = tree.model().horizon();
    for (const auto& [tz, members] : common_preimages(tree, lt, cc)) {
        auto [t, z] = tz;
        if (t >= T) continue;
        auto domain = union_domain(tree, lt, cc, t, z);
        visit_union_prescriptions(tree, lt, members, domain, [&](std::int64_t l, int id, std::int64_t g) {
            for (const auto& c : tree.children(id, g)) cc.update.emplace(CommonUpdateKey{t, z, l, c.common_obs}, cc.labels[c.child]);
        });
    }
}

CommonCompression identity_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt) {
    CommonCompression cc = shaped_common(tree, lt, "identity");
    for (int id : lt.nodes) cc.labels[id] = id;
    derive_common_updates(tree, pc, lt, cc);
    return cc;
}

CommonCompression bcs_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt) {
    CommonCompression cc = shaped_common(tree, lt, "belief");
    std::vector<std::map<std::string, int>> seen(tree.model().horizon());
    for (int id : lt.nodes) {
        const FcsNode& node = tree.node(id);
        // belief fingerprint plus the private labels it induces
        std::string fp = belief_of(node).fingerprint();
        for (std::size_t n = 0; n < node.domain.size(); ++n) {
            fp += "#";
            for (int z : pc.labels[id][n]) fp += std::to_string(z) + ",";
        }
        auto& m = seen[node.time - 1];
        auto it = m.find(fp);
        if (it == m.end()) it = m.emplace(fp, static_cast<int>(m.size())).first;
        cc.labels[id] = it->second;
    }
    derive_common_updates(tree, pc, lt, cc);
    return cc;
}

CommonCompression random_common(const FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt,
                                std::mt19937_64& rng, int max_labels) {
    CommonCompression cc = shaped_common(tree, lt, "random");
    int T = tree.model().horizon();
    std::uniform_int_distribution<int> pick(0, std::max(1, max_labels) - 1);
    for (int id : lt.nodes)
        if (tree.node(id).time == 1) cc.labels[id] = pick(rng);
    for (int t = 1; t < T; ++t) {
        // children sharing an update key must share a label
        std::vector<int> parent(tree.size());
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
        std::map<CommonUpdateKey, int> first;
        std::vector<int> kids;
        for (const auto& [tz, members] : common_preimages(tree, lt, cc)) {
            if (tz.first != t) continue;
            auto domain = union_domain(tree, lt, cc, t, tz.second);
            visit_union_prescriptions(tree, lt, members, domain, [&](std::int64_t l, int id, std::int64_t g) {
                for (const auto& c : tree.children(id, g)) {
                    kids.push_back(c.child);
                    auto [it, fresh] = first.emplace(CommonUpdateKey{t, tz.second, l, c.common_obs}, c.child);
                    if (!fresh) parent[find(c.child)] = find(it->second);
                }
            });
        }
        std::sort(kids.begin(), kids.end());
        kids.erase(std::unique(kids.begin(), kids.end()), kids.end());
        std::map<int, int> component_label;
        for (int k : kids) {
            int root = find(k);
            auto it = component_label.find(root);
            if (it == component_label.end()) it = component_label.emplace(root, pick(rng)).first;
            cc.labels[k] = it->second;
        }
    }
    derive_common_updates(tree, pc, lt, cc);
    return cc;
}

nlohmann::json MeasuredParams::to_json() const {
    auto w = [](const Witness& x) {
        return nlohmann::json{{"t", x.time},        {"fcs", x.fcs},     {"history", x.hist},
                              {"action", x.action}, {"label", x.label}, {"value", x.value}};
    };
    return {{"eps_p", eps_p},
            {"delta_p", delta_p},
            {"eps_c", eps_c},
            {"delta_c", delta_c},
            {"mu", mu},
            {"witnesses",
             {{"eps_p", w(eps_p_witness)}, {"delta_p", w(delta_p_witness)}, {"eps_c", w(eps_c_witness)}, {"delta_c", w(delta_c_witness)}}}};
}

} // namespace ciplan
