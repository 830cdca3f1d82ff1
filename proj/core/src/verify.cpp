#include "ciplan/verify.hpp"

#include "ciplan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>

namespace ciplan {

BoundKind parse_bound_kind(const std::string& name) {
    if (name == "thm1") return BoundKind::thm1;
    if (name == "thm2") return BoundKind::thm2;
    if (name == "thm3") return BoundKind::thm3;
    if (name == "prop5") return BoundKind::prop5;
    if (name == "prop6") return BoundKind::prop6;
    if (name == "lem2") return BoundKind::lem2;
    throw DomainError("unknown bound kind '" + name + "'");
}

std::string to_string(BoundKind kind) {
    switch (kind) {
    case BoundKind::thm1: return "thm1";
    case BoundKind::thm2: return "thm2";
    case BoundKind::thm3: return "thm3";
    case BoundKind::prop5: return "prop5";
    case BoundKind::prop6: return "prop6";
    case BoundKind::lem2: return "lem2";
    }
    return "?";
}

double gap_bound(BoundKind kind, int t_bar, int horizon, double reward_bound, const MeasuredParams& m) {
    if (t_bar < 0 || horizon < 1 || reward_bound < 0 || m.eps_p < 0 || m.delta_p < 0 || m.eps_c < 0 || m.delta_c < 0)
        throw DomainError("bound arguments must be nonnegative with T >= 1");
    double tb = t_bar;
    double TR = horizon * reward_bound;
    double p = m.eps_p + TR * m.delta_p;
    double c = m.eps_c + TR * m.delta_c;
    switch (kind) {
    case BoundKind::thm1: return tb * (tb + 1) / 2 * p + (tb + 1) * m.eps_p;
    case BoundKind::thm2: return tb * c + m.eps_c;
    case BoundKind::thm3: return gap_bound(BoundKind::thm1, t_bar, horizon, reward_bound, m) +
                                 gap_bound(BoundKind::thm2, t_bar, horizon, reward_bound, m);
    case BoundKind::prop5: return tb * p + m.eps_p;
    case BoundKind::prop6: return 2 * tb * c + 2 * m.eps_c;
    case BoundKind::lem2: return tb * p / 2 + m.eps_p / 2;
    }
    throw DomainError("unknown bound kind");
}

nlohmann::json GapReport::to_json() const {
    nlohmann::json rows_j = nlohmann::json::array();
    for (const auto& r : rows)
        rows_j.push_back({{"t", r.t}, {"fcs", r.key}, {"kind", r.kind}, {"observed", r.observed}, {"bound", r.bound},
                          {"slack", r.slack}, {"pass", r.pass}});
    nlohmann::json doc{{"pass", pass},
                       {"complete", complete},
                       {"private", private_name},
                       {"common", common_name},
                       {"params", params.to_json()},
                       {"objective", {{"exact", exact_objective}, {"private", private_objective}, {"common", common_objective}}},
                       {"min_slack", min_slack},
                       {"rows", rows_j}};
    if (!error.empty()) doc["error"] = error;
    return doc;
}

std::string GapReport::to_table() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-6s %-28s %14s %14s %14s %s\n", "t", "kind", "fcs", "observed", "bound",
                  "slack", "pass");
    out << line;
    for (const auto& r : rows) {
        std::string key = r.key.size() > 28 ? r.key.substr(0, 25) + "..." : r.key;
        std::snprintf(line, sizeof line, "%-4d %-6s %-28s %14.9f %14.9f %14.9f %s\n", r.t, r.kind.c_str(), key.c_str(),
                      r.observed, r.bound, r.slack, r.pass ? "ok" : "FAIL");
        out << line;
    }
    std::snprintf(line, sizeof line, "eps_p=%.9g delta_p=%.9g eps_c=%.9g delta_c=%.9g mu=%s\n", params.eps_p,
                  params.delta_p, params.eps_c, params.delta_c, params.mu.c_str());
    out << line;
    out << (pass ? "PASS" : "FAIL") << (complete ? "" : " (incomplete: " + error + ")") << "\n";
    return out.str();
}

namespace {

void add_rows(GapReport& rep, const FcsTree& tree, const std::vector<int>& nodes, BoundKind kind,
              const std::function<double(int)>& observed) {
    const DecPomdpModel& model = tree.model();
    int T = model.horizon();
    for (int t = 1; t <= T; ++t) {
        double bound = gap_bound(kind, T - t, T, model.reward_bound(), rep.params);
        double sup = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (int id : nodes) {
            if (tree.node(id).time != t) continue;
            double gap = observed(id);
            rep.rows.push_back({t, tree.node(id).key(), to_string(kind), gap, bound, bound - gap, gap <= bound + kEqual});
            sup = std::max(sup, gap);
            any = true;
        }
        if (any) rep.rows.push_back({t, "sup", to_string(kind), sup, bound, bound - sup, sup <= bound + kEqual});
    }
}

void finish(GapReport& rep) {
    rep.min_slack = std::numeric_limits<double>::infinity();
    for (const auto& r : rep.rows) {
        rep.pass = rep.pass && r.pass;
        rep.min_slack = std::min(rep.min_slack, r.slack);
    }
    if (rep.rows.empty()) rep.min_slack = 0;
    rep.pass = rep.pass && rep.complete;
}

} // namespace

GapReport verify_gaps(FcsTree& tree, const PrivateCompression& pc, const LabelTree& lt, const CommonCompression& cc,
                      const std::string& mu, const SolveOptions& options) {
    GapReport rep;
    rep.private_name = pc.name;
    rep.common_name = cc.name;
    FcsSolution exact = solve_fcs_fps(tree, options);
    rep.exact_objective = exact.objective;
    MeasuredParams pm = measure_private(tree, pc);
    MeasuredParams cm = measure_common(tree, pc, lt, cc, mu);
    rep.params = pm;
    rep.params.eps_c = cm.eps_c;
    rep.params.delta_c = cm.delta_c;
    rep.params.eps_c_witness = cm.eps_c_witness;
    rep.params.delta_c_witness = cm.delta_c_witness;
    rep.params.mu = mu;

    AspsSolution asps;
    try {
        asps = solve_fcs_asps(tree, pc, options);
    } catch (const BudgetExceeded& e) {
        rep.complete = false;
        rep.error = e.what();
        finish(rep);
        return rep;
    }
    rep.private_objective = asps.objective;
    add_rows(rep, tree, lt.nodes, BoundKind::thm1, [&](int id) { return exact.value[id] - asps.value[id]; });

    AscsSolution ascs;
    try {
        ascs = solve_ascs_asps(tree, pc, lt, cc, mu, options);
    } catch (const BudgetExceeded& e) {
        rep.complete = false;
        rep.error = e.what();
        finish(rep);
        return rep;
    }
    rep.common_objective = ascs.objective;
    auto vcheck = [&](int id) { return ascs.at(tree.node(id).time, cc.labels[id]); };
    add_rows(rep, tree, lt.nodes, BoundKind::thm2, [&](int id) { return asps.value[id] - vcheck(id); });
    add_rows(rep, tree, lt.nodes, BoundKind::thm3, [&](int id) { return exact.value[id] - vcheck(id); });
    finish(rep);
    return rep;
}

namespace {

struct Tracker {
    ConditionResult r;
    // bound < 0 marks an exact identity: no slack is tracked.
    void observe(double value, double bound, const nlohmann::json& witness, long long cases = 1) {
        r.cases += cases;
        if (r.witness.is_null() || value > r.max_violation) {
            r.witness = witness;
            r.max_violation = value;
        }
        if (bound >= 0) r.min_slack = std::min(r.min_slack, bound - value);
        if (value > std::max(bound, 0.0) + kEqual) r.pass = false;
    }
};

nlohmann::json hist_json(const FcsNode& node, const std::vector<int>& hist) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t n = 0; n < hist.size(); ++n) out.push_back(node.domain[n][hist[n]].str());
    return out;
}

// Same joint label at a node.
bool same_labels(const PrivateCompression& pc, int id, const std::vector<int>& a, const std::vector<int>& b) {
    for (std::size_t n = 0; n < a.size(); ++n)
        if (pc.label(id, static_cast<int>(n), a[n]) != pc.label(id, static_cast<int>(n), b[n])) return false;
    return true;
}

} // namespace

ConditionReport check_lemmas(FcsTree& tree, const PrivateCompression& pc, const SolveOptions& options) {
    FcsSolution sol = solve_fcs_fps(tree, options);
    const DecPomdpModel& model = tree.model();
    int T = model.horizon();
    auto rec = check_recursive(tree, pc);
    MeasuredParams params = rec.pass ? measure_private(tree, pc) : MeasuredParams{};

    // Q^S for every (node, fps, prescription)
    std::vector<std::vector<std::vector<double>>> qs(tree.size());
    parallel_for(static_cast<std::size_t>(tree.size()), [&](std::size_t i) {
        int id = static_cast<int>(i);
        const FcsNode& node = tree.node(id);
        qs[id].resize(node.fps.size());
        for (std::size_t f = 0; f < node.fps.size(); ++f) {
            qs[id][f].resize(node.space.size());
            for (std::int64_t g = 0; g < node.space.size(); ++g)
                qs[id][f][g] = supervisor_q(tree, sol, id, node.fps[f].hist, g);
        }
    });

    Tracker qmix{{"QMixture"}}, lem1{{"Lemma1"}}, lem2{{"Lemma2"}}, cor1{{"Cor1"}}, lem3{{"Lemma3"}};
    for (int id = 0; id < tree.size(); ++id) {
        const FcsNode& node = tree.node(id);
        int t = node.time;
        double bound2 = gap_bound(BoundKind::lem2, T - t, T, model.reward_bound(), params);
        std::vector<Prescription> gammas;
        for (std::int64_t g = 0; g < node.space.size(); ++g) gammas.push_back(node.space.decode(g));
        for (std::int64_t g = 0; g < node.space.size(); ++g) {
            double mix = 0;
            for (std::size_t f = 0; f < node.fps.size(); ++f) mix += node.fps[f].prob * qs[id][f][g];
            qmix.observe(std::abs(mix - sol.q[id][g]), -1, {{"fcs", node.key()}, {"gamma", g}});
        }
        for (std::size_t f = 0; f < node.fps.size(); ++f) {
            const auto& h = node.fps[f].hist;
            // spread of Q^S within each group of prescriptions sharing gamma(h)
            int JA = model.num_joint_actions();
            std::vector<double> lo(JA, std::numeric_limits<double>::infinity());
            std::vector<double> hi(JA, -std::numeric_limits<double>::infinity());
            std::vector<std::int64_t> arg_lo(JA, -1), arg_hi(JA, -1);
            std::vector<long long> count(JA, 0);
            for (std::int64_t g = 0; g < node.space.size(); ++g) {
                int a = joint_action(model, gammas[g], h);
                double q = qs[id][f][g];
                ++count[a];
                if (q < lo[a]) lo[a] = q, arg_lo[a] = g;
                if (q > hi[a]) hi[a] = q, arg_hi[a] = g;
                if (t < T) {
                    auto via_g = next_step_via_prescription(tree, id, h, g);
                    auto via_a = next_step_via_action(tree, id, h, a);
                    lem3.observe(tv_distance(via_g, via_a), -1,
                                 {{"fcs", node.key()}, {"history", hist_json(node, h)}, {"gamma", g}});
                }
            }
            for (int a = 0; a < JA; ++a)
                if (count[a] > 1)
                    lem1.observe(hi[a] - lo[a], -1,
                                 {{"fcs", node.key()}, {"history", hist_json(node, h)}, {"action", a},
                                  {"gamma", {arg_lo[a], arg_hi[a]}}},
                                 count[a] * (count[a] - 1) / 2);
        }
        if (!rec.pass) continue;
        std::int64_t best = sol.policy.at(id);
        for (std::size_t f1 = 0; f1 < node.fps.size(); ++f1)
            for (std::size_t f2 = f1 + 1; f2 < node.fps.size(); ++f2) {
                const auto& h1 = node.fps[f1].hist;
                const auto& h2 = node.fps[f2].hist;
                if (!same_labels(pc, id, h1, h2)) continue;
                nlohmann::json w{{"fcs", node.key()}, {"histories", nlohmann::json::array({hist_json(node, h1), hist_json(node, h2)})}};
                for (std::int64_t g = 0; g < node.space.size(); ++g)
                    if (joint_action(model, gammas[g], h1) == joint_action(model, gammas[g], h2)) {
                        w["gamma"] = g;
                        lem2.observe(std::abs(qs[id][f1][g] - qs[id][f2][g]), bound2, w);
                    }
                w["gamma"] = best;
                w["actions"] = {joint_action(model, gammas[best], h1), joint_action(model, gammas[best], h2)};
                cor1.observe(std::abs(qs[id][f1][best] - qs[id][f2][best]), bound2, w);
            }
    }
    if (!rec.pass) {
        for (Tracker* tr : {&lem2, &cor1}) {
            tr->r.pass = false;
            tr->r.note = "private compression is not recursive: " + rec.violations.front().edge;
        }
    }
    ConditionReport rep;
    for (Tracker* tr : {&qmix, &lem1, &lem2, &cor1, &lem3}) rep.conditions.push_back(std::move(tr->r));
    return rep;
}

} // namespace ciplan
