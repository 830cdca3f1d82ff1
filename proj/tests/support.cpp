#include "support.hpp"

#include "ciplan/random_model.hpp"

#include <functional>
#include <stdexcept>
#include <tuple>

namespace ciplan::testing {

std::string data_path(const std::string& name) { return std::string(CIPLAN_DATA_DIR) + "/" + name; }

DecPomdpModel load_fixture(const std::string& name) { return load_model_file(data_path(name + ".json")); }

const std::vector<std::uint64_t>& model_seeds() {
    static const std::vector<std::uint64_t> seeds{11, 23, 37, 41, 59, 73};
    return seeds;
}

namespace {

struct Path {
    std::vector<int> nodes; // root first
};

Path path_to(const FcsTree& tree, int id) {
    Path p;
    for (int n = id; n >= 0; n = tree.node(n).parent) p.nodes.insert(p.nodes.begin(), n);
    return p;
}

// Action of agent n at node under the node's chosen prescription.
int action_at(const FcsTree& tree, int node, std::int64_t gamma, int agent, const std::vector<int>& hist) {
    const FcsNode& nd = tree.node(node);
    int i = nd.find(agent, PrivateHistory{hist});
    if (i < 0) return -1;
    return nd.space.decode(gamma).actions[agent][i];
}

std::vector<std::string> strings(const std::vector<std::vector<int>>& hist) {
    std::vector<std::string> out;
    for (const auto& h : hist) out.push_back(PrivateHistory{h}.str());
    return out;
}

} // namespace

TrajectoryResult enumerate_trajectories(const FcsTree& tree, int id) {
    const DecPomdpModel& m = tree.model();
    int N = m.num_agents();
    Path path = path_to(tree, id);
    TrajectoryResult out;
    std::function<void(std::size_t, int, std::vector<std::vector<int>>, double)> walk =
        [&](std::size_t depth, int s, std::vector<std::vector<int>> hist, double p) {
            if (depth + 1 == path.nodes.size()) {
                out.mass += p;
                out.joint[{s, strings(hist)}] += p;
                return;
            }
            int node = path.nodes[depth];
            const FcsNode& next = tree.node(path.nodes[depth + 1]);
            std::vector<int> a(N);
            for (int n = 0; n < N; ++n) {
                a[n] = action_at(tree, node, next.prescription, n, hist[n]);
                if (a[n] < 0) return;
            }
            for (const auto& o : next_joint_distribution(m, s, JointAction{a})) {
                if (o.obs.common != next.common_obs) continue;
                auto h2 = hist;
                for (int n = 0; n < N; ++n) {
                    h2[n].push_back(a[n]);
                    h2[n].push_back(o.obs.priv[n]);
                }
                walk(depth + 1, o.state, std::move(h2), p * o.p);
            }
        };
    const FcsNode& root = tree.node(path.nodes.front());
    int JP = m.num_joint_private_obs();
    for (int s = 0; s < m.num_states(); ++s)
        for (int jp = 0; jp < JP; ++jp) {
            double p = m.initial(s) * m.observation(s, root.common_obs, jp);
            if (p <= 0) continue;
            std::vector<std::vector<int>> hist(N);
            for (int n = 0; n < N; ++n) hist[n] = {m.private_obs_of(jp, n)};
            walk(0, s, hist, p);
        }
    for (auto& [k, v] : out.joint) v /= out.mass;
    return out;
}

namespace {

// Expected return from node given the joint (state, histories) mass, using gamma at
// the node and choice below it.
double forward_from(const FcsTree& tree, const std::vector<std::int64_t>& choice, int start, std::int64_t gamma,
                    const std::vector<std::tuple<int, std::vector<std::vector<int>>, double>>& mass) {
    const DecPomdpModel& m = tree.model();
    int N = m.num_agents();
    int T = m.horizon();
    double total = 0;
    // node is the FCS of the trajectory so far; children are looked up by (gamma, o0)
    std::function<void(int, int, std::vector<std::vector<int>>, double)> walk =
        [&](int node, int s, std::vector<std::vector<int>> hist, double p) {
            std::int64_t g = node == start ? gamma : choice[node];
            std::vector<int> a(N);
            for (int n = 0; n < N; ++n) {
                a[n] = action_at(tree, node, g, n, hist[n]);
                if (a[n] < 0) return; // pruned below the admissibility threshold
            }
            int ja = m.encode_action(a);
            total += p * m.reward(s, ja);
            if (tree.node(node).time == T) return;
            for (const auto& o : next_joint_distribution(m, s, JointAction{a})) {
                int child = -1;
                for (const auto& c : tree.children(node, g))
                    if (c.common_obs == o.obs.common) child = c.child;
                if (child < 0) continue;
                auto h2 = hist;
                for (int n = 0; n < N; ++n) {
                    h2[n].push_back(a[n]);
                    h2[n].push_back(o.obs.priv[n]);
                }
                walk(child, o.state, std::move(h2), p * o.p);
            }
        };
    for (const auto& [s, hist, p] : mass) walk(start, s, hist, p);
    return total;
}

std::vector<int> parse_history(const std::string& text) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('.', pos);
        if (end == std::string::npos) end = text.size();
        out.push_back(std::stoi(text.substr(pos, end - pos)));
        pos = end + 1;
    }
    return out;
}

} // namespace

double trajectory_value(const FcsTree& tree, const std::vector<std::int64_t>& choice) {
    const DecPomdpModel& m = tree.model();
    int N = m.num_agents();
    int JP = m.num_joint_private_obs();
    double total = 0;
    for (int r : tree.roots()) {
        std::vector<std::tuple<int, std::vector<std::vector<int>>, double>> mass;
        for (int s = 0; s < m.num_states(); ++s)
            for (int jp = 0; jp < JP; ++jp) {
                double p = m.initial(s) * m.observation(s, tree.node(r).common_obs, jp);
                if (p <= 0) continue;
                std::vector<std::vector<int>> hist(N);
                for (int n = 0; n < N; ++n) hist[n] = {m.private_obs_of(jp, n)};
                mass.emplace_back(s, hist, p);
            }
        total += forward_from(tree, choice, r, choice[r], mass);
    }
    return total;
}

double trajectory_supervisor_q(const FcsTree& tree, const std::vector<std::int64_t>& choice, int node,
                               const std::vector<std::string>& hist, std::int64_t gamma) {
    auto traj = enumerate_trajectories(tree, node);
    std::vector<std::tuple<int, std::vector<std::vector<int>>, double>> mass;
    double total = 0;
    for (const auto& [key, p] : traj.joint)
        if (key.second == hist) total += p;
    if (total <= 0) throw std::invalid_argument("history has no mass at the node");
    for (const auto& [key, p] : traj.joint) {
        if (key.second != hist) continue;
        std::vector<std::vector<int>> h;
        for (const auto& x : hist) h.push_back(parse_history(x));
        mass.emplace_back(key.first, h, p / total);
    }
    return forward_from(tree, choice, node, gamma, mass);
}

} // namespace ciplan::testing
