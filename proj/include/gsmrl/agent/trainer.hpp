#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "gsmrl/agent/agent.hpp"

namespace gsmrl {

struct AgentConfig {
  std::vector<std::size_t> hidden = {64, 64};
  double gamma = 0.99;
  double lambda = 0.95;
  PpoConfig ppo;
  std::size_t iterations = 100;
  std::size_t episodes_per_iteration = 128;
  bool shaping = true;    // false: "w/o rm"
  bool side_info = true;  // false: "w/o aux"
  bool terminal_shaping = true;
  TerminalSource train_terminal = TerminalSource::kBest;
  SideInfoConfig side_info_config;
  std::uint64_t seed = 0;
  std::size_t curve_window = 10;
};

inline nlohmann::json to_json(const AgentConfig& c) {
  return {{"hidden", c.hidden},
          {"gamma", c.gamma},
          {"lambda", c.lambda},
          {"clip", c.ppo.clip},
          {"epochs", c.ppo.epochs},
          {"minibatch", c.ppo.minibatch},
          {"value_coef", c.ppo.value_coef},
          {"prediction_coef", c.ppo.prediction_coef},
          {"entropy_coef", c.ppo.entropy_coef},
          {"learning_rate", c.ppo.adam.learning_rate},
          {"max_grad_norm", c.ppo.adam.max_grad_norm},
          {"iterations", c.iterations},
          {"episodes_per_iteration", c.episodes_per_iteration},
          {"shaping", c.shaping},
          {"side_info", c.side_info},
          {"terminal_shaping", c.terminal_shaping},
          {"train_terminal", to_string(c.train_terminal)},
          {"mc_samples", c.side_info_config.mc_samples},
          {"seed", c.seed},
          {"curve_window", c.curve_window}};
}

struct CurvePoint {
  std::size_t iteration = 0;
  double mean_return = 0.0;    // environment plus shaped reward
  double raw_return = 0.0;     // environment reward only
  double moving_return = 0.0;  // moving-window mean of raw_return
  double accuracy = 0.0;       // classification only
  double mean_count = 0.0;
  PpoLosses losses;
};

/// Batched rollouts alternating with clipped policy-gradient updates.
class Trainer {
 public:
  Trainer(std::shared_ptr<const Dataset> data, std::shared_ptr<const Surrogate> surrogate, EnvConfig env_config,
          AgentConfig config)
      : data_(std::move(data)), surrogate_(std::move(surrogate)), env_config_(std::move(env_config)), config_(config) {
    if (!data_ || !surrogate_) throw Error("trainer needs a dataset and a surrogate");
    if (data_->indices(SplitTag::kTrain).empty()) throw Error("no data");
    auto layout = EncodingLayout::for_task(data_->task, data_->d, data_->num_classes, data_->target_dim);
    layout.side_info = config_.side_info;
    Rng init = Rng(config_.seed).substream(0x1417);
    agent_ = GsmrlAgent::create(layout, data_->num_classes, data_->target_dim, config_.hidden, init);
    adam_ = Adam(agent_.network().num_params(), config_.ppo.adam);
    pool_ = data_->indices(SplitTag::kTrain);
  }

  const AgentConfig& config() const noexcept { return config_; }
  const EnvConfig& env_config() const noexcept { return env_config_; }
  GsmrlAgent& agent() noexcept { return agent_; }
  const GsmrlAgent& agent() const noexcept { return agent_; }
  const Adam& optimizer() const noexcept { return adam_; }
  const std::vector<CurvePoint>& curve() const noexcept { return curve_; }
  std::size_t iteration() const noexcept { return iteration_; }

  /// Restores a mid-run snapshot; the next iteration continues with identical randomness.
  void restore(Eigen::VectorXd params, Eigen::VectorXd m, Eigen::VectorXd v, std::uint64_t adam_steps,
               std::size_t iteration, std::vector<CurvePoint> curve) {
    if (params.size() != agent_.network().num_params()) throw Error("checkpoint parameter count mismatch");
    agent_.network().params() = std::move(params);
    adam_.restore(std::move(m), std::move(v), adam_steps);
    iteration_ = iteration;
    curve_ = std::move(curve);
  }

  /// Collects one batch of episodes with the current parameters.
  RolloutBatch rollout(std::size_t iteration, std::vector<double>* raw_returns = nullptr,
                       std::vector<double>* shaped_returns = nullptr, std::size_t* correct = nullptr,
                       std::size_t* acquisitions = nullptr) const {
    Rng rng = Rng(config_.seed).substream(1, iteration);
    AfaEnvironment env(data_, SplitTag::kTrain, env_config_);
    env.set_imputer(surrogate_);
    RolloutBatch batch;
    const std::size_t d = data_->d;
    for (std::size_t ep = 0; ep < config_.episodes_per_iteration; ++ep) {
      env.reset_to(pool_[rng.index(pool_.size())]);
      const Instance& truth = env.hidden_instance();
      double raw = 0.0, shaped = 0.0;
      for (std::size_t t = 0; t <= d; ++t) {
        const AcquisitionState state = env.state();
        const auto mask = env.action_mask();
        SideInfo info;
        if (config_.side_info) {
          std::vector<bool> cands(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(d));
          Rng side_rng = rng.substream(ep, t);
          info = side_info(*surrogate_, state, cands, config_.side_info_config, side_rng);
        }
        const auto step = agent_.evaluate(state, info);
        const auto choice = act_from_logits(step.logits.data(), mask, ActMode::kSample, rng);

        batch.encodings.push_back(step.encoding);
        batch.masks.push_back(mask);
        batch.actions.push_back(choice.action);
        batch.log_probs.push_back(choice.log_prob);
        batch.values.push_back(step.value);
        add_target(batch, truth, state);

        double reward = 0.0;
        if (choice.action == termination_action(d)) {
          Prediction pred = step.prediction;
          if (config_.train_terminal != TerminalSource::kPolicy) {
            Prediction from_surrogate = surrogate_->predict(state);
            if (config_.train_terminal == TerminalSource::kSurrogate || env.loss(from_surrogate) <= env.loss(pred))
              pred = std::move(from_surrogate);
          }
          const auto out = env.step(choice.action, &pred);
          reward = out.reward;
          raw += out.reward;
          if (correct && out.info.correct) ++*correct;
          if (config_.shaping && config_.terminal_shaping) {
            const double s = -surrogate_->potential(state, truth);
            reward += s;
            shaped += s;
          }
          batch.rewards.push_back(reward);
          batch.terminal.push_back(true);
          break;
        }
        const auto out = env.step(choice.action);
        reward = out.reward;
        raw += out.reward;
        if (acquisitions) ++*acquisitions;
        if (config_.shaping) {
          const double s = shaped_reward(*surrogate_, state, out.state, config_.gamma, truth);
          reward += s;
          shaped += s;
        }
        batch.rewards.push_back(reward);
        batch.terminal.push_back(false);
      }
      if (raw_returns) raw_returns->push_back(raw);
      if (shaped_returns) shaped_returns->push_back(raw + shaped);
    }
    return batch;
  }

  /// One rollout + update. Throws on divergence without touching the parameters.
  const CurvePoint& step() {
    std::vector<double> raw, shaped;
    std::size_t correct = 0, acquisitions = 0;
    auto batch = rollout(iteration_, &raw, &shaped, &correct, &acquisitions);
    compute_advantages(batch, config_.gamma, config_.lambda);
    Rng update_rng = Rng(config_.seed).substream(2, iteration_);
    const Eigen::VectorXd before = agent_.network().params();
    const Adam adam_before = adam_;
    PpoLosses losses;
    try {
      losses = ppo_update(agent_.network(), adam_, batch, data_->task, config_.ppo, update_rng);
    } catch (const Error&) {
      agent_.network().params() = before;
      adam_ = adam_before;
      throw Error("training diverged at iteration " + std::to_string(iteration_));
    }
    CurvePoint p;
    p.iteration = iteration_;
    const double n = static_cast<double>(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
      p.raw_return += raw[k] / n;
      p.mean_return += shaped[k] / n;
    }
    p.accuracy = static_cast<double>(correct) / n;
    p.mean_count = static_cast<double>(acquisitions) / n;
    p.losses = losses;
    const std::size_t w = std::max<std::size_t>(1, config_.curve_window);
    double window = p.raw_return;
    std::size_t used = 1;
    for (std::size_t k = curve_.size(); k-- > 0 && used < w; ++used) window += curve_[k].raw_return;
    p.moving_return = window / static_cast<double>(used);
    curve_.push_back(p);
    ++iteration_;
    return curve_.back();
  }

  /// Runs until `config.iterations`; `on_iteration` may stop early by returning false.
  void train(const std::function<bool(const CurvePoint&)>& on_iteration = {}) {
    while (iteration_ < config_.iterations) {
      const auto& p = step();
      if (on_iteration && !on_iteration(p)) break;
    }
  }

 private:
  void add_target(RolloutBatch& batch, const Instance& truth, const AcquisitionState& state) const {
    switch (data_->task) {
      case TaskKind::kClassification: batch.labels.push_back(truth.label); break;
      case TaskKind::kRegression: batch.targets.push_back(truth.target); break;
      case TaskKind::kAir: {
        batch.targets.push_back(truth.features);
        batch.target_masks.push_back(unobserved_flags(state));
        break;
      }
    }
  }

  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<const Surrogate> surrogate_;
  EnvConfig env_config_;
  AgentConfig config_;
  GsmrlAgent agent_;
  Adam adam_;
  std::vector<std::size_t> pool_;
  std::vector<CurvePoint> curve_;
  std::size_t iteration_ = 0;
};

/// Picks the terminal prediction source with the better mean return on the validation split.
inline TerminalSource choose_terminal_source(const GsmrlAgent& trained, std::shared_ptr<const Dataset> data,
                                             const Surrogate& surrogate, const EnvConfig& env_config,
                                             const AgentConfig& config) {
  double best = -std::numeric_limits<double>::infinity();
  TerminalSource winner = TerminalSource::kSurrogate;
  auto pool = data->indices(SplitTag::kVal);
  if (pool.empty()) return winner;
  for (auto source : {TerminalSource::kSurrogate, TerminalSource::kPolicy}) {
    GsmrlAgent agent = trained;
    agent.mode = ActMode::kGreedy;
    AfaEnvironment env(data, SplitTag::kVal, env_config);
    EpisodeOptions opts;
    opts.gamma = config.gamma;
    opts.shaping = false;
    opts.terminal_source = source;
    opts.side_info = config.side_info_config;
    double total = 0.0;
    Rng rng = Rng(config.seed).substream(3);
    for (auto row : pool) {
      env.reset_to(row);
      total += run_episode(env, agent, surrogate, opts, rng).env_return();
    }
    if (total > best) {
      best = total;
      winner = source;
    }
  }
  return winner;
}

}  // namespace gsmrl
