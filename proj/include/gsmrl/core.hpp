#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsmrl/error.hpp"

namespace gsmrl {

enum class TaskKind { kClassification, kRegression, kAir };

inline const char* to_string(TaskKind task) {
  switch (task) {
    case TaskKind::kClassification: return "classification";
    case TaskKind::kRegression: return "regression";
    case TaskKind::kAir: return "air";
  }
  return "?";
}

inline TaskKind parse_task(const std::string& name) {
  if (name == "classification") return TaskKind::kClassification;
  if (name == "regression") return TaskKind::kRegression;
  if (name == "air") return TaskKind::kAir;
  throw ConfigError("unknown task kind '" + name + "'");
}

enum class ConstraintKind { kNone, kChronological };

inline const char* to_string(ConstraintKind c) { return c == ConstraintKind::kNone ? "none" : "chronological"; }

inline ConstraintKind parse_constraint(const std::string& name) {
  if (name == "none") return ConstraintKind::kNone;
  if (name == "chronological") return ConstraintKind::kChronological;
  throw ConfigError("unknown constraint kind '" + name + "'");
}

/// Flat action id: feature indices 0..d-1 acquire, id d terminates.
using Action = std::size_t;

constexpr Action termination_action(std::size_t d) noexcept { return d; }

/// One data record. For AIR the target is the feature vector itself and `target` is left empty.
struct Instance {
  std::vector<double> features;
  int label = -1;              // classification
  std::vector<double> target;  // regression
  std::vector<bool> missing;   // empty means nothing missing
  std::size_t id = 0;

  std::size_t dim() const noexcept { return features.size(); }
  bool is_missing(std::size_t i) const noexcept { return !missing.empty() && missing[i]; }
};

/// Set of observed feature indices o within {0..d-1}.
class FeatureMask {
 public:
  FeatureMask() = default;
  explicit FeatureMask(std::size_t d) : flags_(d, false) {}

  std::size_t dim() const noexcept { return flags_.size(); }
  std::size_t count() const noexcept { return count_; }
  bool contains(std::size_t i) const noexcept { return i < flags_.size() && flags_[i]; }

  void insert(std::size_t i) {
    if (i >= flags_.size()) throw Error("feature index " + std::to_string(i) + " out of range");
    if (flags_[i]) throw Error("feature " + std::to_string(i) + " already observed");
    flags_[i] = true;
    ++count_;
  }

  std::vector<std::size_t> observed() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < flags_.size(); ++i)
      if (flags_[i]) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> unobserved() const {
    std::vector<std::size_t> out;
    out.reserve(flags_.size() - count_);
    for (std::size_t i = 0; i < flags_.size(); ++i)
      if (!flags_[i]) out.push_back(i);
    return out;
  }

  /// Largest observed index, or nullopt for the empty set.
  std::optional<std::size_t> max_observed() const {
    for (std::size_t i = flags_.size(); i-- > 0;)
      if (flags_[i]) return i;
    return std::nullopt;
  }

  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;

 private:
  std::vector<bool> flags_;
  std::size_t count_ = 0;
};

/// MDP state s = [o, x_o]. Values are kept sparsely, sorted by feature index;
/// `order` records the acquisition sequence.
class AcquisitionState {
 public:
  struct Entry {
    std::size_t index;
    double value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  AcquisitionState() = default;
  explicit AcquisitionState(std::size_t d) : mask_(d) {}

  std::size_t dim() const noexcept { return mask_.dim(); }
  const FeatureMask& mask() const noexcept { return mask_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::span<const std::size_t> order() const noexcept { return order_; }
  std::size_t step() const noexcept { return order_.size(); }
  bool terminated() const noexcept { return terminated_; }
  bool observed(std::size_t i) const noexcept { return mask_.contains(i); }
  std::size_t num_observed() const noexcept { return mask_.count(); }

  std::vector<std::size_t> observed_indices() const {
    std::vector<std::size_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.index);
    return out;
  }
  std::vector<double> observed_values() const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.value);
    return out;
  }

  std::optional<double> value(std::size_t i) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), i,
                               [](const Entry& e, std::size_t k) { return e.index < k; });
    if (it == entries_.end() || it->index != i) return std::nullopt;
    return it->value;
  }

  /// Dense rendering; unobserved slots get `fill`.
  std::vector<double> dense(double fill = 0.0) const {
    std::vector<double> out(dim(), fill);
    for (const auto& e : entries_) out[e.index] = e.value;
    return out;
  }

  /// Content equality: same mask and values regardless of acquisition order.
  bool same_content(const AcquisitionState& other) const {
    return mask_ == other.mask_ && entries_ == other.entries_ && terminated_ == other.terminated_;
  }

  friend AcquisitionState apply_acquisition(const AcquisitionState& state, std::size_t index, double value);
  friend AcquisitionState terminate(const AcquisitionState& state);

 private:
  FeatureMask mask_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> order_;
  bool terminated_ = false;
};

/// Returns a new state with `index` observed at `value`; the input is untouched.
inline AcquisitionState apply_acquisition(const AcquisitionState& state, std::size_t index, double value) {
  if (state.terminated_) throw Error("episode terminated");
  if (index >= state.dim()) throw Error("feature index " + std::to_string(index) + " out of range");
  if (state.mask_.contains(index)) throw Error("feature " + std::to_string(index) + " already observed");
  AcquisitionState next = state;
  next.mask_.insert(index);
  auto pos = std::lower_bound(next.entries_.begin(), next.entries_.end(), index,
                              [](const AcquisitionState::Entry& e, std::size_t k) { return e.index < k; });
  next.entries_.insert(pos, {index, value});
  next.order_.push_back(index);
  return next;
}

inline AcquisitionState terminate(const AcquisitionState& state) {
  if (state.terminated_) throw Error("episode terminated");
  AcquisitionState next = state;
  next.terminated_ = true;
  return next;
}

/// Valid actions: unobserved indices allowed by the constraint, plus termination (id d).
inline std::vector<Action> candidate_actions(const AcquisitionState& state, ConstraintKind constraint) {
  if (state.terminated()) throw Error("episode terminated");
  const std::size_t d = state.dim();
  std::size_t first = 0;
  if (constraint == ConstraintKind::kChronological) {
    if (auto last = state.mask().max_observed()) first = *last + 1;
  }
  std::vector<Action> out;
  for (std::size_t i = first; i < d; ++i)
    if (!state.observed(i)) out.push_back(i);
  out.push_back(termination_action(d));
  return out;
}

/// Per-feature costs c_i and trade-off weight alpha.
class CostModel {
 public:
  CostModel() = default;

  /// Uniform 1/d per feature so that acquiring everything costs 1.
  static CostModel uniform(std::size_t d, double alpha) {
    CostModel m(std::vector<double>(d, d == 0 ? 0.0 : 1.0 / static_cast<double>(d)), alpha);
    m.uniform_ = true;
    return m;
  }

  CostModel with_alpha(double alpha) const {
    CostModel m = *this;
    if (alpha < 0.0) throw ConfigError("cost trade-off alpha must be >= 0");
    m.alpha_ = alpha;
    return m;
  }

  CostModel(std::vector<double> costs, double alpha) : costs_(std::move(costs)), alpha_(alpha) {
    if (alpha_ < 0.0) throw ConfigError("cost trade-off alpha must be >= 0");
    for (double c : costs_)
      if (!(c >= 0.0)) throw ConfigError("feature costs must be >= 0");
  }

  std::size_t dim() const noexcept { return costs_.size(); }
  double alpha() const noexcept { return alpha_; }
  double cost(std::size_t i) const { return costs_.at(i); }
  std::span<const double> costs() const noexcept { return costs_; }

  bool is_uniform() const noexcept { return uniform_; }

  /// C(o), the additive set cost. Uniform models return |o|/d, so the endpoints 0 and 1 are exact.
  double set_cost(const FeatureMask& mask) const {
    std::size_t count = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < costs_.size(); ++i) {
      if (!mask.contains(i)) continue;
      ++count;
      total += costs_[i];
    }
    if (uniform_) return static_cast<double>(count) / static_cast<double>(costs_.size());
    return total;
  }

 private:
  std::vector<double> costs_;
  double alpha_ = 0.0;
  bool uniform_ = false;
};

/// Prediction: class probabilities for classification; mean and std otherwise.
struct Prediction {
  std::vector<double> probabilities;
  std::vector<double> mean;
  std::vector<double> stddev;

  bool is_categorical() const noexcept { return !probabilities.empty(); }

  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) -
                                    probabilities.begin());
  }

  static Prediction categorical(std::vector<double> p) {
    Prediction out;
    out.probabilities = std::move(p);
    return out;
  }
  static Prediction gaussian(std::vector<double> mean, std::vector<double> sd) {
    Prediction out;
    out.mean = std::move(mean);
    out.stddev = std::move(sd);
    return out;
  }
};

/// Natural-log entropy of a categorical distribution.
inline double categorical_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

/// KL(p || q) for categorical distributions.
inline double categorical_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) kl += p[k] * (std::log(p[k]) - std::log(std::max(q[k], 1e-300)));
  return kl;
}

/// Numerically stable softmax of log-weights.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

/// Per-step auxiliary bundle from the surrogate.
struct SideInfo {
  std::vector<double> imputed_mean;
  std::vector<double> imputed_std;
  std::vector<double> utility;
  Prediction prediction;
  double step_fraction = 0.0;
};

}  // namespace gsmrl
