#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gsmrl/episode.hpp"

namespace gsmrl {

struct GreedyConfig {
  /// Stop when the best utility falls below this (nats). AIR utilities are entropies and can be
  /// negative, so the threshold is only applied to the MI-based tasks unless forced.
  double threshold = 1e-3;
  bool threshold_for_air = false;
  std::optional<std::size_t> budget;
  SideInfoConfig utilities;
};

namespace detail {
inline bool stop_below(const GreedyConfig& c, TaskKind task, double best) {
  if (task == TaskKind::kAir && !c.threshold_for_air) return false;
  return best < c.threshold;
}
}  // namespace detail

/// Arg-max utility among the valid features of `mask` (ties to the lowest index), or
/// termination when nothing clears the threshold or the budget is spent.
inline Action greedy_step(const Surrogate& model, const AcquisitionState& state, const std::vector<bool>& mask,
                          const GreedyConfig& config, Rng& rng) {
  const std::size_t d = state.dim();
  const Action phi = termination_action(d);
  std::vector<bool> cands(d, false);
  bool any = false;
  for (std::size_t i = 0; i < d; ++i) any |= (cands[i] = mask[i]);
  const bool can_stop = mask[phi];
  if (!any || (config.budget && state.step() >= *config.budget && can_stop)) return phi;
  const auto u = model.utilities(state, cands, config.utilities, rng);
  std::size_t best = d;
  for (std::size_t i = 0; i < d; ++i)
    if (cands[i] && (best == d || u[i] > u[best])) best = i;
  if (can_stop && !config.budget && detail::stop_below(config, model.task(), u[best])) return phi;
  return best;
}

class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(GreedyConfig config) : config_(std::move(config)) {}
  std::string name() const override { return "greedy"; }
  Action act(const PolicyContext& ctx, Rng& rng) override {
    return greedy_step(ctx.surrogate, ctx.state, ctx.mask, config_, rng);
  }

 private:
  GreedyConfig config_;
};

struct StaticOrder {
  std::vector<std::size_t> order;
  std::vector<double> mean_utility;  // per rank
};

/// At each rank, the feature with the highest utility averaged over `instances` given the
/// earlier picks observed with each instance's own values.
inline StaticOrder build_static_order(const Surrogate& model, const std::vector<const Instance*>& instances,
                                      const SideInfoConfig& config, Rng& rng) {
  if (instances.empty()) throw Error("static order needs a non-empty split");
  const std::size_t d = model.num_features();
  StaticOrder out;
  std::vector<AcquisitionState> states(instances.size(), AcquisitionState(d));
  std::vector<bool> picked(d, false);
  for (std::size_t r = 0; r < d; ++r) {
    std::vector<bool> cands(d);
    for (std::size_t i = 0; i < d; ++i) cands[i] = !picked[i];
    std::vector<double> total(d, 0.0);
    for (const auto& s : states) {
      const auto u = model.utilities(s, cands, config, rng);
      for (std::size_t i = 0; i < d; ++i) total[i] += u[i];
    }
    std::size_t best = d;
    for (std::size_t i = 0; i < d; ++i)
      if (cands[i] && (best == d || total[i] > total[best])) best = i;
    picked[best] = true;
    out.order.push_back(best);
    out.mean_utility.push_back(total[best] / static_cast<double>(states.size()));
    for (std::size_t k = 0; k < states.size(); ++k)
      states[k] = apply_acquisition(states[k], best, instances[k]->features[best]);
  }
  return out;
}

/// Acquires in a fixed order up to the budget (or the whole order), then terminates.
class StaticPolicy : public Policy {
 public:
  StaticPolicy(StaticOrder order, std::optional<std::size_t> budget) : order_(std::move(order)), budget_(budget) {}
  std::string name() const override { return "static"; }
  Action act(const PolicyContext& ctx, Rng&) override {
    const std::size_t d = ctx.state.dim();
    const std::size_t limit = budget_ ? std::min(*budget_, d) : d;
    if (ctx.state.step() < limit) {
      for (auto i : order_.order)
        if (ctx.mask[i]) return i;
    }
    return termination_action(d);
  }
  const StaticOrder& order() const noexcept { return order_; }

 private:
  StaticOrder order_;
  std::optional<std::size_t> budget_;
};

/// Acquires valid features uniformly at random until the budget, then terminates.
class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::optional<std::size_t> budget) : budget_(budget) {}
  std::string name() const override { return "random"; }
  Action act(const PolicyContext& ctx, Rng& rng) override {
    const std::size_t d = ctx.state.dim();
    std::vector<double> w;
    for (std::size_t i = 0; i < d; ++i) w.push_back(ctx.mask[i] ? 1.0 : 0.0);
    const bool over = budget_ && ctx.state.step() >= *budget_;
    if ((over || std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) && ctx.mask[d])
      return termination_action(d);
    if (!budget_ && ctx.mask[d]) w.push_back(1.0);
    return rng.categorical(w);
  }

 private:
  std::optional<std::size_t> budget_;
};

// ---- time series ---------------------------------------------------------------------------

struct DirichletAcquirer {
  double concentration = 1.0;  // alpha_dir
  std::size_t samples = 10;    // N
  std::size_t horizon = 0;     // T; 0 means d
  double mi_cap = 50.0;
};

struct DirichletDecision {
  Action action = 0;
  std::vector<std::size_t> steps;  // remaining time steps t
  std::vector<double> prior;
  std::vector<double> counts;
  std::vector<double> posterior;
  std::vector<double> rho;
};

/// Prior Dir(alpha (T - t)) over the remaining steps, N informativeness draws with
/// p(V = t) proportional to exp(I_t), conjugate update, then arg-max of one posterior draw.
inline DirichletDecision dirichlet_next(const DirichletAcquirer& acq, const Surrogate& model,
                                        const AcquisitionState& state, const SideInfoConfig& utilities, Rng& rng) {
  if (acq.concentration <= 0.0) throw ConfigError("Dirichlet concentration must be > 0");
  if (acq.samples == 0) throw ConfigError("Dirichlet sample count must be >= 1");
  const std::size_t d = state.dim();
  const std::size_t T = acq.horizon == 0 ? d : acq.horizon;
  if (T > d) throw ConfigError("Dirichlet horizon exceeds the number of features");
  DirichletDecision out;
  const auto last = state.mask().max_observed();
  const std::size_t first = last ? *last + 1 : 0;
  for (std::size_t t = first; t < T; ++t) out.steps.push_back(t);
  if (out.steps.empty()) {
    out.action = termination_action(d);
    return out;
  }
  std::vector<bool> cands(d, false);
  for (auto t : out.steps) cands[t] = true;
  const auto mi = model.utilities(state, cands, utilities, rng);

  const std::size_t n = out.steps.size();
  out.prior.resize(n);
  out.counts.assign(n, 0.0);
  std::vector<double> weights(n);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) top = std::max(top, std::min(mi[out.steps[k]], acq.mi_cap));
  for (std::size_t k = 0; k < n; ++k) {
    out.prior[k] = acq.concentration * static_cast<double>(T - out.steps[k]);
    weights[k] = std::exp(std::min(mi[out.steps[k]], acq.mi_cap) - top);
  }
  for (std::size_t s = 0; s < acq.samples; ++s) out.counts[rng.categorical(weights)] += 1.0;
  out.posterior.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.posterior[k] = out.prior[k] + out.counts[k];
  out.rho = rng.dirichlet(out.posterior);
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (out.rho[k] > out.rho[best]) best = k;
  out.action = out.steps[best];
  return out;
}

/// Dirichlet scheme with an optional acquisition budget.
class DirichletPolicy : public Policy {
 public:
  DirichletPolicy(DirichletAcquirer acq, std::optional<std::size_t> budget, SideInfoConfig utilities = {})
      : acq_(acq), budget_(budget), utilities_(utilities) {}
  std::string name() const override { return "dirichlet"; }
  Action act(const PolicyContext& ctx, Rng& rng) override {
    const std::size_t d = ctx.state.dim();
    if (budget_ && ctx.state.step() >= *budget_ && ctx.mask[d]) return termination_action(d);
    auto decision = dirichlet_next(acq_, ctx.surrogate, ctx.state, utilities_, rng);
    if (decision.action != termination_action(d) && !ctx.mask[decision.action]) throw Error("Dirichlet picked an invalid step");
    return decision.action;
  }

 private:
  DirichletAcquirer acq_;
  std::optional<std::size_t> budget_;
  SideInfoConfig utilities_;
};

}  // namespace gsmrl
