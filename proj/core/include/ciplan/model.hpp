#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ciplan {

/// Per-agent action indices.
struct JointAction {
    std::vector<int> actions;
};

/// Common observation index plus per-agent private observation indices.
struct JointObservation {
    int common = 0;
    std::vector<int> priv;
    bool operator==(const JointObservation&) const = default;
};

/// Raw tensors of a model before validation. Tensors are flattened row-major:
/// transition[s][ja][s'], observation[s][o0][jp], reward[s][ja], where ja and jp
/// are mixed-radix joint indices with agent 1 most significant.
struct ModelData {
    std::string name;
    std::vector<std::string> states;
    std::vector<std::vector<std::string>> actions;
    std::vector<std::string> common_obs;
    std::vector<std::vector<std::string>> private_obs;
    std::vector<double> transition;
    std::vector<double> observation;
    std::vector<double> reward;
    std::vector<double> initial;
    int horizon = 1;
    std::optional<double> reward_bound;
};

/// One nonzero entry of P_O(.|s).
struct Emission {
    int common;
    int priv; // joint private index
    double p;
};

struct Successor {
    int state;
    double p;
};

/// Outcome of one step: next state and joint observation.
struct StepOutcome {
    int state;
    JointObservation obs;
    double p;
};

/// Returns every invariant violation of the data; empty when valid.
std::vector<std::string> validate(const ModelData& data);

/// Immutable validated Dec-POMDP.
class DecPomdpModel {
public:
    /// Throws ValidationError listing all violations.
    explicit DecPomdpModel(ModelData data);

    const ModelData& data() const { return data_; }
    const std::string& name() const { return data_.name; }

    int num_agents() const { return static_cast<int>(data_.actions.size()); }
    int num_states() const { return static_cast<int>(data_.states.size()); }
    int num_actions(int agent) const { return static_cast<int>(data_.actions[agent].size()); }
    int num_joint_actions() const { return joint_actions_; }
    int num_common_obs() const { return static_cast<int>(data_.common_obs.size()); }
    int num_private_obs(int agent) const { return static_cast<int>(data_.private_obs[agent].size()); }
    int num_joint_private_obs() const { return joint_private_; }
    int horizon() const { return data_.horizon; }
    double reward_bound() const { return reward_bound_; }

    int encode_action(std::span<const int> actions) const;
    std::vector<int> decode_action(int joint) const;
    int action_stride(int agent) const { return action_stride_[agent]; }
    int encode_private_obs(std::span<const int> obs) const;
    std::vector<int> decode_private_obs(int joint) const;
    int private_obs_of(int joint, int agent) const {
        return (joint / private_stride_[agent]) % num_private_obs(agent);
    }

    double transition(int s, int ja, int s2) const;
    double observation(int s, int o0, int jp) const;
    double reward(int s, int ja) const { return data_.reward[s * joint_actions_ + ja]; }
    double initial(int s) const { return data_.initial[s]; }

    /// Nonzero P_T(.|s,ja) in state order.
    const std::vector<Successor>& successors(int s, int ja) const { return succ_[s * joint_actions_ + ja]; }
    /// Nonzero P_O(.|s) in (o0, jp) order.
    const std::vector<Emission>& emissions(int s) const { return emit_[s]; }

    bool operator==(const DecPomdpModel& other) const;

private:
    ModelData data_;
    int joint_actions_ = 1;
    int joint_private_ = 1;
    double reward_bound_ = 0;
    std::vector<int> action_stride_;
    std::vector<int> private_stride_;
    std::vector<std::vector<Successor>> succ_;
    std::vector<std::vector<Emission>> emit_;
};

/// Parses a model document. Throws ParseError (with line/field) or ValidationError.
DecPomdpModel load_model(const std::string& text);
DecPomdpModel load_model_file(const std::string& path);

/// Canonical document; load_model(serialize_model(m)) == m.
std::string serialize_model(const DecPomdpModel& model);

/// P(s', o | s, a) = P_T(s'|s,a) P_O(o|s'), nonzero atoms only.
std::vector<StepOutcome> next_joint_distribution(const DecPomdpModel& model, int s, const JointAction& a);

/// r[s][a]. Throws DomainError on a bad index.
double expected_reward(const DecPomdpModel& model, int s, const JointAction& a);

} // namespace ciplan
