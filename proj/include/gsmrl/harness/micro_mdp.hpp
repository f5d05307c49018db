#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <vector>

#include "gsmrl/discrete_exact.hpp"

namespace gsmrl {

struct MicroMdpConfig {
  double gamma = 1.0;
  bool shaping = false;
  bool terminal_shaping = true;
  double tie_tolerance = 1e-9;
  std::size_t state_cap = 1u << 20;
};

struct MicroState {
  AcquisitionState state;
  double probability = 0.0;           // P(x_o); 0 for unreachable value combinations
  std::vector<double> q;              // per action, -inf where invalid
  std::vector<Action> optimal;        // all actions within the tie tolerance of the best
  Action action = 0;                  // preferred optimum: termination first, then lowest index
  double value = 0.0;
};

/// Exact solution of the acquisition MDP defined by a discrete joint table.
struct MicroSolution {
  std::size_t d = 0;
  std::vector<std::size_t> levels;
  std::map<std::vector<int>, MicroState> states;  // key: level per feature, -1 if unobserved

  static std::vector<int> key_of(const AcquisitionState& s) {
    std::vector<int> k(s.dim(), -1);
    for (const auto& e : s.entries()) k[e.index] = static_cast<int>(std::llround(e.value));
    return k;
  }
  const MicroState& at(const AcquisitionState& s) const {
    auto it = states.find(key_of(s));
    if (it == states.end()) throw Error("state not in the solved micro-MDP");
    return it->second;
  }

  /// States with positive probability reachable from the empty state under any policy.
  std::vector<const MicroState*> reachable() const {
    std::vector<const MicroState*> out;
    for (const auto& [k, s] : states)
      if (s.probability > 0.0) out.push_back(&s);
    return out;
  }

  /// States visited with positive probability when following the preferred optimal action.
  std::vector<const MicroState*> reachable_under_optimal() const {
    std::vector<const MicroState*> out;
    std::vector<const MicroState*> stack = {&at(AcquisitionState(d))};
    while (!stack.empty()) {
      const MicroState* s = stack.back();
      stack.pop_back();
      out.push_back(s);
      if (s->action == termination_action(d)) continue;
      for (std::size_t v = 0; v < levels[s->action]; ++v) {
        const auto next = apply_acquisition(s->state, s->action, static_cast<double>(v));
        const auto& ns = at(next);
        if (ns.probability > 0.0) stack.push_back(&ns);
      }
    }
    return out;
  }
};

/// Backward induction over every (o, x_o). Acquisition pays alpha * c_i; termination pays the
/// expected cross-entropy of the Bayes posterior, i.e. -H(y | x_o). With shaping the
/// potential -H(y | x_o) adds gamma * Phi(s') - Phi(s) per acquisition and -Phi(s) at termination.
inline MicroSolution solve_micro_mdp(const DiscreteExactSurrogate& model, const CostModel& costs,
                                     const MicroMdpConfig& config) {
  if (model.task() != TaskKind::kClassification) throw Error("micro-MDP solver needs a classification table");
  const std::size_t d = model.num_features();
  if (costs.dim() != d) throw ConfigError("cost vector length does not match d");
  double count = 1.0;
  for (auto l : model.levels()) count *= static_cast<double>(l + 1);
  if (count > static_cast<double>(config.state_cap)) throw Error("micro-MDP state space exceeds the cap");

  MicroSolution sol;
  sol.d = d;
  sol.levels.assign(model.levels().begin(), model.levels().end());
  const double alpha = costs.alpha();
  const Action phi = termination_action(d);

  std::function<double(const AcquisitionState&, double)> solve = [&](const AcquisitionState& s, double prob) -> double {
    const auto key = MicroSolution::key_of(s);
    if (auto it = sol.states.find(key); it != sol.states.end()) return it->second.value;
    MicroState ms;
    ms.state = s;
    ms.probability = prob;
    ms.q.assign(d + 1, -std::numeric_limits<double>::infinity());
    const bool reachable = prob > 0.0;
    const auto post = reachable ? model.posterior(s) : std::vector<double>();
    const double h = reachable ? categorical_entropy(post) : 0.0;
    const double phi_s = -h;
    ms.q[phi] = -h + (config.shaping && config.terminal_shaping ? -phi_s : 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      if (s.observed(i)) continue;
      const auto px = reachable ? model.feature_marginal(s, i) : std::vector<double>(model.levels()[i], 0.0);
      double q = -alpha * costs.cost(i);
      for (std::size_t v = 0; v < model.levels()[i]; ++v) {
        const auto next = apply_acquisition(s, i, static_cast<double>(v));
        const double pv = px[v];
        const double vn = solve(next, prob * pv);
        if (pv <= 0.0) continue;
        double r = config.gamma * vn;
        if (config.shaping) r += config.gamma * -categorical_entropy(model.posterior(next)) - phi_s;
        q += pv * r;
      }
      ms.q[i] = q;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (double q : ms.q) best = std::max(best, q);
    const double tol = config.tie_tolerance * std::max(1.0, std::abs(best));
    for (Action a = 0; a <= d; ++a)
      if (ms.q[a] >= best - tol) ms.optimal.push_back(a);
    ms.action = std::find(ms.optimal.begin(), ms.optimal.end(), phi) != ms.optimal.end() ? phi : ms.optimal.front();
    ms.value = best;
    sol.states.emplace(key, std::move(ms));
    return best;
  };
  solve(AcquisitionState(d), 1.0);
  return sol;
}

/// A dataset of level-coded rows drawn from the table; values are left unnormalized so they
/// remain valid levels of the surrogate.
inline Dataset sample_discrete_dataset(const DiscreteExactSurrogate& model, std::size_t n, std::uint64_t seed,
                                       SplitFractions fractions = {}) {
  if (n == 0) throw Error("no data");
  Rng rng(seed);
  Dataset ds;
  ds.name = "micro";
  ds.task = model.task();
  ds.d = model.num_features();
  ds.num_classes = model.num_classes();
  for (std::size_t k = 0; k < n; ++k) {
    auto inst = model.sample(rng);
    inst.id = k;
    ds.instances.push_back(std::move(inst));
  }
  ds.split = make_split(n, fractions, mix64(seed + 17));
  ds.normalization.feature_min.assign(ds.d, 0.0);
  ds.normalization.feature_max.assign(ds.d, 1.0);
  return ds;
}

}  // namespace gsmrl
