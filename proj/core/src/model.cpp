#include "ciplan/model.hpp"

#include "ciplan/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ciplan {

using nlohmann::json;
using nlohmann::ordered_json;

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error([&] {
          std::string msg = "model validation failed:";
          for (const auto& v : violations) msg += "\n  " + v;
          return msg;
      }()),
      violations_(std::move(violations)) {}

BudgetExceeded::BudgetExceeded(const std::string& locus, long long needed, long long budget)
    : Error("budget exceeded at " + locus + ": needs " + std::to_string(needed) + " evaluations, cap " +
            std::to_string(budget)),
      locus_(locus) {}

namespace {

long long product(const std::vector<std::vector<std::string>>& sets) {
    long long p = 1;
    for (const auto& s : sets) p *= static_cast<long long>(s.size());
    return p;
}

std::string index_path(const std::vector<int>& idx) {
    std::string out;
    for (int i : idx) out += "[" + std::to_string(i) + "]";
    return out;
}

// Decodes a flat row-major index into per-dimension indices.
std::vector<int> unflatten(long long flat, const std::vector<int>& dims) {
    std::vector<int> idx(dims.size());
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(flat % dims[d]);
        flat /= dims[d];
    }
    return idx;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

// Checks each row (last dimension) of a flattened tensor is a distribution.
void check_rows(const std::string& field, const std::vector<double>& flat, const std::vector<int>& dims,
                std::vector<std::string>& out) {
    long long row_len = dims.back();
    if (row_len <= 0) return;
    long long rows = static_cast<long long>(flat.size()) / row_len;
    std::vector<int> outer(dims.begin(), dims.end() - 1);
    for (long long r = 0; r < rows; ++r) {
        double sum = 0;
        bool negative = false;
        for (long long k = 0; k < row_len; ++k) {
            double v = flat[r * row_len + k];
            if (!std::isfinite(v) || v < 0) negative = true;
            sum += v;
        }
        std::string locus = field + " row " + index_path(unflatten(r, outer));
        if (negative) out.push_back(locus + " has a negative or non-finite entry");
        if (std::abs(sum - 1.0) > kEqual) out.push_back(locus + " sums to " + fmt(sum) + " (expected 1)");
    }
}

} // namespace

std::vector<std::string> validate(const ModelData& d) {
    std::vector<std::string> out;
    if (d.states.empty()) out.push_back("states is empty");
    if (d.actions.empty()) out.push_back("num_agents must be positive");
    for (std::size_t n = 0; n < d.actions.size(); ++n)
        if (d.actions[n].empty()) out.push_back("actions[" + std::to_string(n) + "] is empty");
    if (d.common_obs.empty()) out.push_back("common_obs is empty");
    if (d.private_obs.size() != d.actions.size())
        out.push_back("private_obs has " + std::to_string(d.private_obs.size()) + " agents, expected " +
                      std::to_string(d.actions.size()));
    for (std::size_t n = 0; n < d.private_obs.size(); ++n)
        if (d.private_obs[n].empty()) out.push_back("private_obs[" + std::to_string(n) + "] is empty");
    if (d.horizon < 1) out.push_back("horizon must be at least 1");
    if (!out.empty()) return out;

    long long S = static_cast<long long>(d.states.size());
    long long JA = product(d.actions);
    long long O0 = static_cast<long long>(d.common_obs.size());
    long long JP = product(d.private_obs);

    auto check_size = [&](const std::string& field, std::size_t got, long long want) {
        if (static_cast<long long>(got) != want) {
            out.push_back(field + " has " + std::to_string(got) + " entries, expected " + std::to_string(want));
            return false;
        }
        return true;
    };

    std::vector<int> adims{static_cast<int>(S)};
    for (const auto& a : d.actions) adims.push_back(static_cast<int>(a.size()));
    std::vector<int> tdims = adims;
    tdims.push_back(static_cast<int>(S));
    std::vector<int> odims{static_cast<int>(S), static_cast<int>(O0)};
    for (const auto& o : d.private_obs) odims.push_back(static_cast<int>(o.size()));

    if (check_size("transition", d.transition.size(), S * JA * S)) check_rows("transition", d.transition, tdims, out);
    if (check_size("observation", d.observation.size(), S * O0 * JP)) {
        // rows of P_O are over the whole (o0, o1..oN) block
        std::vector<int> flat_dims{static_cast<int>(S), static_cast<int>(O0 * JP)};
        check_rows("observation", d.observation, flat_dims, out);
    }
    if (check_size("initial", d.initial.size(), S)) check_rows("initial", d.initial, {static_cast<int>(S)}, out);
    if (check_size("reward", d.reward.size(), S * JA)) {
        double max_abs = 0;
        for (std::size_t k = 0; k < d.reward.size(); ++k) {
            if (!std::isfinite(d.reward[k])) out.push_back("reward" + index_path(unflatten(k, adims)) + " is not finite");
            else max_abs = std::max(max_abs, std::abs(d.reward[k]));
        }
        if (d.reward_bound) {
            if (*d.reward_bound < 0) out.push_back("reward_bound is negative");
            for (std::size_t k = 0; k < d.reward.size(); ++k)
                if (std::abs(d.reward[k]) > *d.reward_bound + kEqual)
                    out.push_back("reward" + index_path(unflatten(k, adims)) + " = " + fmt(d.reward[k]) +
                                  " exceeds reward_bound " + fmt(*d.reward_bound));
        }
    }
    return out;
}

DecPomdpModel::DecPomdpModel(ModelData data) : data_(std::move(data)) {
    auto violations = validate(data_);
    if (!violations.empty()) throw ValidationError(std::move(violations));

    int N = num_agents();
    action_stride_.assign(N, 1);
    private_stride_.assign(N, 1);
    for (int n = N - 1; n >= 0; --n) {
        action_stride_[n] = joint_actions_;
        joint_actions_ *= num_actions(n);
        private_stride_[n] = joint_private_;
        joint_private_ *= num_private_obs(n);
    }
    double max_abs = 0;
    for (double r : data_.reward) max_abs = std::max(max_abs, std::abs(r));
    reward_bound_ = data_.reward_bound.value_or(max_abs);

    int S = num_states();
    succ_.resize(static_cast<std::size_t>(S) * joint_actions_);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < joint_actions_; ++a)
            for (int s2 = 0; s2 < S; ++s2) {
                double p = transition(s, a, s2);
                if (p > 0) succ_[s * joint_actions_ + a].push_back({s2, p});
            }
    emit_.resize(S);
    for (int s = 0; s < S; ++s)
        for (int o0 = 0; o0 < num_common_obs(); ++o0)
            for (int jp = 0; jp < joint_private_; ++jp) {
                double p = observation(s, o0, jp);
                if (p > 0) emit_[s].push_back({o0, jp, p});
            }
}

int DecPomdpModel::encode_action(std::span<const int> actions) const {
    if (static_cast<int>(actions.size()) != num_agents()) throw DomainError("joint action has wrong arity");
    int j = 0;
    for (int n = 0; n < num_agents(); ++n) {
        if (actions[n] < 0 || actions[n] >= num_actions(n))
            throw DomainError("action index " + std::to_string(actions[n]) + " out of range for agent " +
                              std::to_string(n));
        j += actions[n] * action_stride_[n];
    }
    return j;
}

std::vector<int> DecPomdpModel::decode_action(int joint) const {
    std::vector<int> a(num_agents());
    for (int n = 0; n < num_agents(); ++n) a[n] = (joint / action_stride_[n]) % num_actions(n);
    return a;
}

int DecPomdpModel::encode_private_obs(std::span<const int> obs) const {
    if (static_cast<int>(obs.size()) != num_agents()) throw DomainError("private observation has wrong arity");
    int j = 0;
    for (int n = 0; n < num_agents(); ++n) {
        if (obs[n] < 0 || obs[n] >= num_private_obs(n))
            throw DomainError("private observation index out of range for agent " + std::to_string(n));
        j += obs[n] * private_stride_[n];
    }
    return j;
}

std::vector<int> DecPomdpModel::decode_private_obs(int joint) const {
    std::vector<int> o(num_agents());
    for (int n = 0; n < num_agents(); ++n) o[n] = private_obs_of(joint, n);
    return o;
}

double DecPomdpModel::transition(int s, int ja, int s2) const {
    return data_.transition[(static_cast<std::size_t>(s) * joint_actions_ + ja) * num_states() + s2];
}

double DecPomdpModel::observation(int s, int o0, int jp) const {
    return data_.observation[(static_cast<std::size_t>(s) * num_common_obs() + o0) * joint_private_ + jp];
}

bool DecPomdpModel::operator==(const DecPomdpModel& o) const {
    const auto& a = data_;
    const auto& b = o.data_;
    return a.name == b.name && a.states == b.states && a.actions == b.actions && a.common_obs == b.common_obs &&
           a.private_obs == b.private_obs && a.transition == b.transition && a.observation == b.observation &&
           a.reward == b.reward && a.initial == b.initial && a.horizon == b.horizon &&
           reward_bound_ == o.reward_bound_;
}

namespace {

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

const json& require(const json& doc, const char* field) {
    auto it = doc.find(field);
    if (it == doc.end()) throw ParseError(std::string("field '") + field + "'", "missing");
    return *it;
}

std::vector<std::string> string_list(const json& j, const std::string& field) {
    if (!j.is_array()) throw ParseError("field '" + field + "'", "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string()) throw ParseError("field '" + field + "[" + std::to_string(i) + "]'", "expected a string");
        out.push_back(j[i].get<std::string>());
    }
    return out;
}

std::vector<std::vector<std::string>> string_lists(const json& j, const std::string& field) {
    if (!j.is_array()) throw ParseError("field '" + field + "'", "expected an array of string arrays");
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string_list(j[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

void flatten(const json& j, const std::vector<int>& dims, std::size_t depth, const std::string& path,
             std::vector<double>& out) {
    if (depth == dims.size()) {
        if (!j.is_number()) throw ParseError("field '" + path + "'", "expected a number");
        out.push_back(j.get<double>());
        return;
    }
    if (!j.is_array() || static_cast<int>(j.size()) != dims[depth])
        throw ParseError("field '" + path + "'", "expected an array of length " + std::to_string(dims[depth]));
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], dims, depth + 1, path + "[" + std::to_string(i) + "]", out);
}

ordered_json nest(const std::vector<double>& flat, const std::vector<int>& dims, std::size_t depth, std::size_t& pos) {
    if (depth == dims.size()) return flat[pos++];
    ordered_json arr = ordered_json::array();
    for (int i = 0; i < dims[depth]; ++i) arr.push_back(nest(flat, dims, depth + 1, pos));
    return arr;
}

} // namespace

DecPomdpModel load_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col), "malformed document");
    }
    if (!doc.is_object()) throw ParseError("line 1", "document must be an object");

    ModelData d;
    if (auto it = doc.find("name"); it != doc.end() && it->is_string()) d.name = it->get<std::string>();
    const json& na = require(doc, "num_agents");
    if (!na.is_number_integer() || na.get<long long>() < 1)
        throw ParseError("field 'num_agents'", "expected a positive integer");
    int N = na.get<int>();
    d.states = string_list(require(doc, "states"), "states");
    d.actions = string_lists(require(doc, "actions"), "actions");
    d.common_obs = string_list(require(doc, "common_obs"), "common_obs");
    d.private_obs = string_lists(require(doc, "private_obs"), "private_obs");
    if (static_cast<int>(d.actions.size()) != N)
        throw ParseError("field 'actions'", "expected " + std::to_string(N) + " agent action lists");
    if (static_cast<int>(d.private_obs.size()) != N)
        throw ParseError("field 'private_obs'", "expected " + std::to_string(N) + " agent observation lists");
    const json& h = require(doc, "horizon");
    if (!h.is_number_integer()) throw ParseError("field 'horizon'", "expected an integer");
    d.horizon = h.get<int>();

    int S = static_cast<int>(d.states.size());
    std::vector<int> adims{S};
    for (const auto& a : d.actions) adims.push_back(static_cast<int>(a.size()));
    std::vector<int> tdims = adims;
    tdims.push_back(S);
    std::vector<int> odims{S, static_cast<int>(d.common_obs.size())};
    for (const auto& o : d.private_obs) odims.push_back(static_cast<int>(o.size()));

    flatten(require(doc, "transition"), tdims, 0, "transition", d.transition);
    flatten(require(doc, "observation"), odims, 0, "observation", d.observation);
    flatten(require(doc, "reward"), adims, 0, "reward", d.reward);
    flatten(require(doc, "initial"), {S}, 0, "initial", d.initial);
    if (auto it = doc.find("reward_bound"); it != doc.end()) {
        if (!it->is_number()) throw ParseError("field 'reward_bound'", "expected a number");
        d.reward_bound = it->get<double>();
    }
    return DecPomdpModel(std::move(d));
}

DecPomdpModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open model file");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return load_model(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.locus(), std::string(e.what()).substr(e.locus().size() + 2));
    }
}

std::string serialize_model(const DecPomdpModel& model) {
    const ModelData& d = model.data();
    int S = model.num_states();
    std::vector<int> adims{S};
    for (const auto& a : d.actions) adims.push_back(static_cast<int>(a.size()));
    std::vector<int> tdims = adims;
    tdims.push_back(S);
    std::vector<int> odims{S, model.num_common_obs()};
    for (const auto& o : d.private_obs) odims.push_back(static_cast<int>(o.size()));

    ordered_json doc;
    if (!d.name.empty()) doc["name"] = d.name;
    doc["num_agents"] = model.num_agents();
    doc["states"] = d.states;
    doc["actions"] = d.actions;
    doc["common_obs"] = d.common_obs;
    doc["private_obs"] = d.private_obs;
    std::size_t pos = 0;
    doc["transition"] = nest(d.transition, tdims, 0, pos);
    pos = 0;
    doc["observation"] = nest(d.observation, odims, 0, pos);
    pos = 0;
    doc["reward"] = nest(d.reward, adims, 0, pos);
    doc["initial"] = d.initial;
    doc["horizon"] = d.horizon;
    doc["reward_bound"] = model.reward_bound();
    return doc.dump(2) + "\n";
}

namespace {

void check_state(const DecPomdpModel& m, int s) {
    if (s < 0 || s >= m.num_states()) throw DomainError("state index " + std::to_string(s) + " out of range");
}

} // namespace

std::vector<StepOutcome> next_joint_distribution(const DecPomdpModel& model, int s, const JointAction& a) {
    check_state(model, s);
    int ja = model.encode_action(a.actions);
    std::vector<StepOutcome> out;
    for (const auto& [s2, pt] : model.successors(s, ja))
        for (const auto& e : model.emissions(s2))
            out.push_back({s2, JointObservation{e.common, model.decode_private_obs(e.priv)}, pt * e.p});
    return out;
}

double expected_reward(const DecPomdpModel& model, int s, const JointAction& a) {
    check_state(model, s);
    return model.reward(s, model.encode_action(a.actions));
}

} // namespace ciplan
