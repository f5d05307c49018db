#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsmrl/data.hpp"
#include "gsmrl/surrogate.hpp"

namespace gsmrl {

enum class InstanceSelector { kSequential, kRandom };

struct EnvConfig {
  CostModel costs;
  ConstraintKind constraint = ConstraintKind::kNone;
  std::optional<std::size_t> hard_budget;
  InstanceSelector selector = InstanceSelector::kSequential;
  double probability_floor = 1e-12;  // keeps the cross-entropy finite for zero-probability truths
};

struct StepInfo {
  double cost_paid = 0.0;
  double terminal_loss = 0.0;
  bool correct = false;
  bool revealed_missing = false;
};

struct StepOutcome {
  AcquisitionState state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Terminal loss L(y_hat, y): cross-entropy at the true label, squared error of the target,
/// or squared reconstruction error of the unobserved features for AIR.
inline double terminal_loss(TaskKind task, const Prediction& pred, const Instance& truth, const AcquisitionState& state,
                            double probability_floor = 1e-12) {
  switch (task) {
    case TaskKind::kClassification: {
      const auto y = static_cast<std::size_t>(truth.label);
      if (y >= pred.probabilities.size()) throw Error("prediction has no probability for the true label");
      return -std::log(std::max(pred.probabilities[y], probability_floor));
    }
    case TaskKind::kRegression: {
      if (pred.mean.size() != truth.target.size()) throw Error("prediction dimension does not match target");
      double se = 0.0;
      for (std::size_t j = 0; j < truth.target.size(); ++j) se += (pred.mean[j] - truth.target[j]) * (pred.mean[j] - truth.target[j]);
      return se;
    }
    case TaskKind::kAir: {
      if (pred.mean.size() != truth.dim()) throw Error("reconstruction dimension does not match features");
      double se = 0.0;
      for (std::size_t i = 0; i < truth.dim(); ++i)
        if (!state.observed(i)) se += (pred.mean[i] - truth.features[i]) * (pred.mean[i] - truth.features[i]);
      return se;
    }
  }
  return 0.0;
}

/// The acquisition MDP over one split of a dataset.
class AfaEnvironment {
 public:
  AfaEnvironment(std::shared_ptr<const Dataset> data, SplitTag split, EnvConfig config, std::uint64_t seed = 0)
      : data_(std::move(data)), config_(std::move(config)), rng_(seed) {
    if (!data_) throw Error("environment needs a dataset");
    pool_ = data_->indices(split);
    if (config_.costs.dim() == 0) config_.costs = CostModel::uniform(data_->d, 0.0);
    if (config_.costs.dim() != data_->d) throw ConfigError("cost vector length does not match d");
  }

  /// Missing source values are revealed as this model's conditional mean.
  void set_imputer(std::shared_ptr<const Surrogate> imputer) { imputer_ = std::move(imputer); }

  const Dataset& dataset() const noexcept { return *data_; }
  const EnvConfig& config() const noexcept { return config_; }
  TaskKind task() const noexcept { return data_->task; }
  std::size_t dim() const noexcept { return data_->d; }
  std::size_t pool_size() const noexcept { return pool_.size(); }
  const AcquisitionState& state() const noexcept { return state_; }
  bool active() const noexcept { return active_; }

  AcquisitionState reset() {
    if (pool_.empty()) throw Error("no data");
    std::size_t k = 0;
    if (config_.selector == InstanceSelector::kSequential) {
      k = pool_[cursor_ % pool_.size()];
      ++cursor_;
    } else {
      k = pool_[rng_.index(pool_.size())];
    }
    return start(k);
  }

  /// Resets to a specific dataset row.
  AcquisitionState reset_to(std::size_t row) {
    if (row >= data_->instances.size()) throw Error("instance " + std::to_string(row) + " out of range");
    return start(row);
  }

  /// Valid actions as a length d+1 mask, including hard-budget rules.
  std::vector<bool> action_mask() const {
    if (!active_) throw Error("episode terminated");
    std::vector<bool> mask(dim() + 1, false);
    const auto cands = candidate_actions(state_, config_.constraint);
    const std::size_t phi = termination_action(dim());
    const bool features_left = cands.size() > 1;
    if (config_.hard_budget && state_.step() >= *config_.hard_budget) {
      mask[phi] = true;
      return mask;
    }
    for (auto a : cands) mask[a] = true;
    if (config_.hard_budget && features_left) mask[phi] = false;
    return mask;
  }

  StepOutcome step(Action action, const Prediction* prediction = nullptr) {
    if (!active_) throw Error("episode terminated");
    const auto mask = action_mask();
    if (action >= mask.size() || !mask[action]) throw Error("invalid action " + std::to_string(action));
    StepOutcome out;
    const Instance& x = current();
    if (action == termination_action(dim())) {
      if (prediction == nullptr) throw Error("termination requires a prediction");
      out.info.terminal_loss = loss(*prediction);
      out.info.correct = task() == TaskKind::kClassification &&
                         prediction->argmax() == static_cast<std::size_t>(x.label);
      out.reward = -out.info.terminal_loss;
      out.done = true;
      state_ = terminate(state_);
      active_ = false;
      out.state = state_;
      return out;
    }
    double value = x.features[action];
    if (x.is_missing(action) && imputer_) {
      std::vector<double> mean, sd;
      imputer_->impute(state_, mean, sd);
      value = mean[action];
      out.info.revealed_missing = true;
    } else if (x.is_missing(action)) {
      out.info.revealed_missing = true;
    }
    out.info.cost_paid = config_.costs.cost(action);
    out.reward = -config_.costs.alpha() * out.info.cost_paid;
    state_ = apply_acquisition(state_, action, value);
    out.state = state_;
    return out;
  }

  /// Loss a prediction would incur if submitted now. Used by trusted reward code only.
  double loss(const Prediction& prediction) const {
    return terminal_loss(task(), prediction, current(), state_, config_.probability_floor);
  }

  /// The hidden record. Reward computation (shaping potentials, metrics) is its only legitimate reader.
  const Instance& hidden_instance() const { return current(); }
  std::size_t current_row() const noexcept { return row_; }

 private:
  const Instance& current() const {
    if (!started_) throw Error("environment not reset");
    return data_->instances[row_];
  }

  AcquisitionState start(std::size_t row) {
    row_ = row;
    started_ = true;
    active_ = true;
    state_ = AcquisitionState(dim());
    return state_;
  }

  std::shared_ptr<const Dataset> data_;
  EnvConfig config_;
  Rng rng_;
  std::shared_ptr<const Surrogate> imputer_;
  std::vector<std::size_t> pool_;
  std::size_t cursor_ = 0;
  std::size_t row_ = 0;
  bool started_ = false;
  bool active_ = false;
  AcquisitionState state_;
};

}  // namespace gsmrl
