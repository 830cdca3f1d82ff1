#include "ciplan/compression.hpp"

#include <set>
#include <unordered_map>

namespace ciplan {

using nlohmann::json;

namespace {

std::unordered_map<std::string, int> key_index(const FcsTree& tree) {
    std::unordered_map<std::string, int> out;
    for (int id = 0; id < tree.size(); ++id) out.emplace(tree.node(id).key(), id);
    return out;
}

int lookup(const std::unordered_map<std::string, int>& index, const std::string& key, const std::string& locus) {
    auto it = index.find(key);
    if (it == index.end()) throw ParseError(locus, "FCS '" + key + "' is not reachable in this model");
    return it->second;
}

template <class T>
T field(const json& j, const char* name, const std::string& locus) {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(locus, std::string("missing field '") + name + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ParseError(locus, std::string("field '") + name + "' has the wrong type");
    }
}

} // namespace

json private_to_json(const FcsTree& tree, const PrivateCompression& pc, const MeasuredParams* params) {
    int N = tree.model().num_agents();
    int T = tree.model().horizon();
    auto alphabet = pc.alphabet(tree);
    json agents = json::array();
    for (int n = 0; n < N; ++n) {
        json times = json::array();
        for (int t = 1; t <= T; ++t) {
            json labels = json::array();
            json updates = json::array();
            for (int id = 0; id < tree.size(); ++id) {
                const FcsNode& node = tree.node(id);
                if (node.time != t) continue;
                for (std::size_t i = 0; i < node.domain[n].size(); ++i)
                    labels.push_back({{"fcs", node.key()}, {"history", node.domain[n][i].str()}, {"label", pc.labels[id][n][i]}});
            }
            for (const auto& [k, v] : pc.update)
                if (k.agent == n && tree.node(k.child).time == t)
                    updates.push_back({{"label", k.label}, {"fcs", tree.node(k.child).key()}, {"obs", k.obs}, {"next", v}});
            times.push_back({{"t", t}, {"alphabet", alphabet[n * T + t - 1]}, {"labels", labels}, {"updates", updates}});
        }
        agents.push_back({{"agent", n}, {"times", times}});
    }
    json doc{{"kind", "private"}, {"name", pc.name}, {"agents", agents}};
    if (params) doc["params"] = params->to_json();
    return doc;
}

PrivateCompression private_from_json(FcsTree& tree, const json& doc, long long budget) {
    tree.build_full(budget);
    if (field<std::string>(doc, "kind", "compression") != "private")
        throw ParseError("compression", "expected kind 'private'");
    auto index = key_index(tree);
    int N = tree.model().num_agents();
    PrivateCompression pc;
    pc.name = doc.value("name", std::string("loaded"));
    pc.labels.resize(tree.size());
    for (int id = 0; id < tree.size(); ++id)
        for (const auto& d : tree.node(id).domain) pc.labels[id].emplace_back(d.size(), -1);
    const json& agents = doc.at("agents");
    for (const auto& a : agents) {
        int n = field<int>(a, "agent", "agents");
        if (n < 0 || n >= N) throw ParseError("agents", "agent index " + std::to_string(n) + " out of range");
        for (const auto& tj : a.at("times")) {
            std::string locus = "agents[" + std::to_string(n) + "].t" + std::to_string(field<int>(tj, "t", "times"));
            for (const auto& row : tj.at("labels")) {
                int id = lookup(index, field<std::string>(row, "fcs", locus), locus);
                std::string h = field<std::string>(row, "history", locus);
                const auto& dom = tree.node(id).domain[n];
                int i = -1;
                for (std::size_t k = 0; k < dom.size(); ++k)
                    if (dom[k].str() == h) i = static_cast<int>(k);
                if (i < 0) throw ParseError(locus, "history '" + h + "' is not reachable at FCS '" + tree.node(id).key() + "'");
                pc.labels[id][n][i] = field<int>(row, "label", locus);
            }
            for (const auto& row : tj.at("updates")) {
                int child = lookup(index, field<std::string>(row, "fcs", locus), locus);
                pc.update[{n, child, field<int>(row, "label", locus), field<int>(row, "obs", locus)}] =
                    field<int>(row, "next", locus);
            }
        }
    }
    for (int id = 0; id < tree.size(); ++id)
        for (int n = 0; n < N; ++n)
            for (std::size_t i = 0; i < pc.labels[id][n].size(); ++i)
                if (pc.labels[id][n][i] < 0)
                    throw CompressionError("no label for agent " + std::to_string(n) + " history " +
                                           tree.node(id).domain[n][i].str() + " at FCS '" + tree.node(id).key() + "'");
    return pc;
}

json common_to_json(const FcsTree& tree, const CommonCompression& cc, const MeasuredParams* params) {
    int T = tree.model().horizon();
    json times = json::array();
    for (int t = 1; t <= T; ++t) {
        json labels = json::array();
        std::set<int> alphabet;
        for (int id = 0; id < tree.size(); ++id)
            if (tree.node(id).time == t && cc.labels[id] >= 0) {
                labels.push_back({{"fcs", tree.node(id).key()}, {"label", cc.labels[id]}});
                alphabet.insert(cc.labels[id]);
            }
        json updates = json::array();
        for (const auto& [k, v] : cc.update)
            if (k.time == t) updates.push_back({{"label", k.label}, {"lambda", k.lambda}, {"obs", k.obs}, {"next", v}});
        times.push_back({{"t", t}, {"alphabet", alphabet}, {"labels", labels}, {"updates", updates}});
    }
    json doc{{"kind", "common"}, {"name", cc.name}, {"times", times}};
    if (params) doc["params"] = params->to_json();
    return doc;
}

CommonCompression common_from_json(FcsTree& tree, const json& doc) {
    tree.build_full();
    if (field<std::string>(doc, "kind", "compression") != "common")
        throw ParseError("compression", "expected kind 'common'");
    auto index = key_index(tree);
    CommonCompression cc;
    cc.name = doc.value("name", std::string("loaded"));
    cc.labels.assign(tree.size(), -1);
    for (const auto& tj : doc.at("times")) {
        int t = field<int>(tj, "t", "times");
        std::string locus = "common.t" + std::to_string(t);
        for (const auto& row : tj.at("labels"))
            cc.labels[lookup(index, field<std::string>(row, "fcs", locus), locus)] = field<int>(row, "label", locus);
        for (const auto& row : tj.at("updates"))
            cc.update[{t, field<int>(row, "label", locus), field<std::int64_t>(row, "lambda", locus),
                       field<int>(row, "obs", locus)}] = field<int>(row, "next", locus);
    }
    return cc;
}

} // namespace ciplan
