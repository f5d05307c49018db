#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gsmrl/environment.hpp"

namespace gsmrl {

/// What a policy sees at each step.
struct PolicyContext {
  const AcquisitionState& state;
  const std::vector<bool>& mask;  // length d+1
  const SideInfo& side_info;      // empty unless the policy asked for it
  const Surrogate& surrogate;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual Action act(const PolicyContext& ctx, Rng& rng) = 0;
  /// Policy-side prediction at termination; nullopt defers to the surrogate.
  virtual std::optional<Prediction> predict(const PolicyContext&) { return std::nullopt; }
  virtual bool wants_side_info() const { return false; }
  /// Called at the start of each episode.
  virtual void begin_episode() {}
};

enum class TerminalSource { kSurrogate, kPolicy, kBest };

inline const char* to_string(TerminalSource s) {
  switch (s) {
    case TerminalSource::kSurrogate: return "surrogate";
    case TerminalSource::kPolicy: return "policy";
    case TerminalSource::kBest: return "best";
  }
  return "?";
}

inline TerminalSource parse_terminal_source(const std::string& name) {
  if (name == "surrogate") return TerminalSource::kSurrogate;
  if (name == "policy") return TerminalSource::kPolicy;
  if (name == "best") return TerminalSource::kBest;
  throw ConfigError("unknown terminal source '" + name + "'");
}

struct EpisodeOptions {
  double gamma = 0.99;
  bool shaping = true;
  bool terminal_shaping = true;  // adds -Phi(s) at termination so the shaped MDP keeps its optimal policy
  TerminalSource terminal_source = TerminalSource::kSurrogate;
  SideInfoConfig side_info;
  bool record_side_info = false;
};

struct EpisodeRecord {
  std::size_t instance_id = 0;
  std::size_t row = 0;
  std::vector<Action> actions;  // acquisitions followed by the termination action
  std::vector<double> acquired_values;
  std::vector<double> cost_rewards;
  std::vector<double> shaped_rewards;
  double terminal_reward = 0.0;
  double terminal_shaping = 0.0;
  double terminal_loss = 0.0;
  std::string prediction_source;
  Prediction prediction;
  int true_label = -1;
  std::vector<double> true_target;
  bool correct = false;
  double acquisition_cost = 0.0;  // C(o), without the alpha weight
  std::size_t missing_revealed = 0;
  AcquisitionState final_state;
  std::vector<SideInfo> side_infos;  // one per decision when recorded

  std::size_t count() const noexcept { return cost_rewards.size(); }

  /// Unshaped return -alpha C(o) - L.
  double env_return() const {
    double r = terminal_reward;
    for (double c : cost_rewards) r += c;
    return r;
  }

  double shaping_return() const {
    double r = terminal_shaping;
    for (double s : shaped_rewards) r += s;
    return r;
  }
};

inline SideInfo empty_side_info() { return {}; }

/// One full acquisition episode on the environment's current instance. The environment must
/// have been reset.
inline EpisodeRecord run_episode(AfaEnvironment& env, Policy& policy, const Surrogate& surrogate,
                                 const EpisodeOptions& options, Rng& rng) {
  if (!env.active()) throw Error("environment not reset");
  const std::size_t d = env.dim();
  const Instance& truth = env.hidden_instance();
  EpisodeRecord rec;
  rec.instance_id = truth.id;
  rec.row = env.current_row();
  rec.true_label = truth.label;
  rec.true_target = env.task() == TaskKind::kAir ? truth.features : truth.target;
  policy.begin_episode();

  const bool need_info = policy.wants_side_info() || options.record_side_info;
  for (std::size_t t = 0; t <= d; ++t) {
    const AcquisitionState state = env.state();
    const auto mask = env.action_mask();
    SideInfo info;
    if (need_info) {
      std::vector<bool> cands(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(d));
      Rng side_rng = rng.substream(0x51de, t);
      info = side_info(surrogate, state, cands, options.side_info, side_rng);
      if (options.record_side_info) rec.side_infos.push_back(info);
    }
    const PolicyContext ctx{state, mask, info, surrogate};
    const Action a = policy.act(ctx, rng);
    rec.actions.push_back(a);

    if (a == termination_action(d)) {
      Prediction chosen = surrogate.predict(state);
      rec.prediction_source = "surrogate";
      if (options.terminal_source != TerminalSource::kSurrogate) {
        if (auto own = policy.predict(ctx)) {
          if (options.terminal_source == TerminalSource::kPolicy || env.loss(*own) < env.loss(chosen)) {
            chosen = std::move(*own);
            rec.prediction_source = "policy";
          }
        }
      }
      const auto out = env.step(a, &chosen);
      rec.terminal_reward = out.reward;
      rec.terminal_loss = out.info.terminal_loss;
      rec.correct = out.info.correct;
      rec.prediction = std::move(chosen);
      if (options.shaping && options.terminal_shaping) rec.terminal_shaping = -surrogate.potential(state, truth);
      rec.final_state = out.state;
      rec.acquisition_cost = env.config().costs.set_cost(out.state.mask());
      return rec;
    }

    const auto out = env.step(a);
    rec.acquired_values.push_back(*out.state.value(a));
    rec.cost_rewards.push_back(out.reward);
    rec.missing_revealed += out.info.revealed_missing ? 1 : 0;
    rec.shaped_rewards.push_back(options.shaping ? shaped_reward(surrogate, state, out.state, options.gamma, truth) : 0.0);
  }
  throw Error("episode exceeded d acquisitions");
}

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json j;
  if (p.is_categorical()) {
    j["probabilities"] = p.probabilities;
  } else {
    j["mean"] = p.mean;
    j["stddev"] = p.stddev;
  }
  return j;
}

/// One line of an episode log.
inline nlohmann::json to_json(const EpisodeRecord& r) {
  nlohmann::json j;
  j["instance"] = r.instance_id;
  j["actions"] = r.actions;
  j["values"] = r.acquired_values;
  j["cost_rewards"] = r.cost_rewards;
  j["shaped_rewards"] = r.shaped_rewards;
  j["terminal_reward"] = r.terminal_reward;
  j["terminal_shaping"] = r.terminal_shaping;
  j["prediction"] = to_json(r.prediction);
  j["prediction_source"] = r.prediction_source;
  if (r.true_label >= 0) {
    j["truth"] = r.true_label;
    j["correct"] = r.correct;
  } else {
    j["truth"] = r.true_target;
  }
  return j;
}

}  // namespace gsmrl
