#pragma once

#include <cmath>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gsmrl/core.hpp"
#include "gsmrl/random.hpp"

namespace gsmrl {

/// Mean of a Monte Carlo estimator with its standard error.
struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;

  static MonteCarloEstimate from_samples(std::span<const double> xs) {
    MonteCarloEstimate est;
    est.samples = xs.size();
    if (xs.empty()) return est;
    double sum = 0.0;
    for (double x : xs) sum += x;
    est.value = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double sq = 0.0;
      for (double x : xs) sq += (x - est.value) * (x - est.value);
      est.std_error = std::sqrt(sq / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return est;
  }
};

enum class ClassUtility { kFast, kMonteCarlo };

struct SideInfoConfig {
  std::size_t mc_samples = 64;
  ClassUtility class_utility = ClassUtility::kFast;
};

/// A fitted generative model answering the conditional queries used during acquisition.
/// Fitted models are immutable; all queries are const and thread-compatible.
class Surrogate {
 public:
  virtual ~Surrogate() = default;

  virtual std::string kind() const = 0;
  virtual TaskKind task() const = 0;
  virtual std::size_t num_features() const = 0;
  virtual std::size_t num_classes() const { return 0; }
  virtual std::size_t target_dim() const { return 0; }

  /// p(y | x_o) for classification; conditional mean/std of the target otherwise
  /// (AIR: a d-vector echoing observed values, std 0 there).
  virtual Prediction predict(const AcquisitionState& state) const = 0;

  /// Imputed means and stds for every feature; observed slots echo the value with std 0.
  virtual void impute(const AcquisitionState& state, std::vector<double>& mean, std::vector<double>& sd) const = 0;

  /// Task-default utility of every candidate marked in `candidates` (size d); 0 elsewhere.
  virtual std::vector<double> utilities(const AcquisitionState& state, const std::vector<bool>& candidates,
                                        const SideInfoConfig& config, Rng& rng) const = 0;

  /// Shaping potential Phi(s). Classification/regression: -H(y | x_o).
  /// AIR: log p(x_u | x_o) / |u| at the true unobserved values (0 when u is empty).
  virtual double potential(const AcquisitionState& state, const Instance& truth) const = 0;

  virtual void save(std::ostream& out) const = 0;
};

/// Potential-based intermediate reward gamma * Phi(s') - Phi(s).
inline double shaped_reward(const Surrogate& model, const AcquisitionState& before, const AcquisitionState& after,
                            double gamma, const Instance& truth) {
  return gamma * model.potential(after, truth) - model.potential(before, truth);
}

/// Side information bundle for the agent.
inline SideInfo side_info(const Surrogate& model, const AcquisitionState& state, const std::vector<bool>& candidates,
                          const SideInfoConfig& config, Rng& rng) {
  SideInfo info;
  model.impute(state, info.imputed_mean, info.imputed_std);
  info.utility = model.utilities(state, candidates, config, rng);
  info.prediction = model.predict(state);
  const std::size_t d = model.num_features();
  info.step_fraction = d == 0 ? 0.0 : static_cast<double>(state.step()) / static_cast<double>(d);
  return info;
}

/// Candidate flags (length d) for all unobserved features.
inline std::vector<bool> unobserved_flags(const AcquisitionState& state) {
  std::vector<bool> out(state.dim());
  for (std::size_t i = 0; i < state.dim(); ++i) out[i] = !state.observed(i);
  return out;
}

}  // namespace gsmrl
