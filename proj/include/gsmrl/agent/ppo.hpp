#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gsmrl/agent/adam.hpp"
#include "gsmrl/agent/network.hpp"
#include "gsmrl/core.hpp"

namespace gsmrl {

enum class ActMode { kSample, kGreedy };

/// Log-probabilities of the masked categorical; invalid entries are -inf.
inline std::vector<double> masked_log_softmax(const double* logits, const std::vector<bool>& mask) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) m = std::max(m, logits[j]);
  if (!std::isfinite(m)) throw Error("no valid action");
  double total = 0.0;
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) total += std::exp(logits[j] - m);
  const double log_total = m + std::log(total);
  std::vector<double> out(mask.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) out[j] = logits[j] - log_total;
  return out;
}

struct ActResult {
  Action action = 0;
  double log_prob = 0.0;
  double value = 0.0;
};

inline ActResult act_from_logits(const double* logits, const std::vector<bool>& mask, ActMode mode, Rng& rng) {
  const auto logp = masked_log_softmax(logits, mask);
  ActResult r;
  if (mode == ActMode::kGreedy) {
    // Ties go to the lowest index.
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j] && logp[j] > best) {
        best = logp[j];
        r.action = j;
      }
  } else {
    std::vector<double> p(mask.size(), 0.0);
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j]) p[j] = std::exp(logp[j]);
    r.action = rng.categorical(p);
  }
  r.log_prob = logp[r.action];
  // A singleton distribution has log-probability exactly 0.
  if (std::count(mask.begin(), mask.end(), true) == 1) r.log_prob = 0.0;
  return r;
}

/// Samples or picks the arg-max action from the policy head under `mask`.
inline ActResult act(const Network& net, const std::vector<double>& encoding, const std::vector<bool>& mask, ActMode mode,
                     Rng& rng) {
  if (mask.size() != net.shape().actions) throw Error("mask size does not match action count");
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) throw Error("all actions masked");
  const Eigen::Map<const Eigen::VectorXd> x(encoding.data(), static_cast<Eigen::Index>(encoding.size()));
  const auto cache = net.forward(x);
  auto r = act_from_logits(cache.output[0].data(), mask, mode, rng);
  r.value = cache.output[1](0, 0);
  return r;
}

/// Transitions from a set of complete episodes, stored in order.
struct RolloutBatch {
  std::vector<std::vector<double>> encodings;
  std::vector<std::vector<bool>> masks;
  std::vector<Action> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;  // environment reward plus shaped reward
  std::vector<double> values;
  std::vector<bool> terminal;   // last transition of its episode
  std::vector<double> advantages;
  std::vector<double> returns;
  // Prediction targets: the label for classification, the target (regression) or the full
  // feature vector (AIR) with `target_mask` selecting the unobserved dimensions.
  std::vector<int> labels;
  std::vector<std::vector<double>> targets;
  std::vector<std::vector<bool>> target_masks;

  std::size_t size() const noexcept { return actions.size(); }
};

/// Lambda-weighted advantage recursion per episode; returns = advantages + values.
inline void compute_advantages(RolloutBatch& batch, double gamma, double lambda) {
  const std::size_t n = batch.size();
  if (batch.rewards.size() != n || batch.values.size() != n || batch.terminal.size() != n)
    throw Error("rollout batch arrays are misaligned");
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    if (batch.terminal[t]) {
      next_adv = 0.0;
      next_value = 0.0;
    }
    const double delta = batch.rewards[t] + gamma * next_value - batch.values[t];
    next_adv = delta + gamma * lambda * next_adv;
    batch.advantages[t] = next_adv;
    batch.returns[t] = next_adv + batch.values[t];
    next_value = batch.values[t];
  }
}

/// Zero mean, unit standard deviation; left unscaled when the spread is degenerate.
inline std::vector<double> normalize_advantages(const std::vector<double>& adv) {
  if (adv.empty()) return {};
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double sd = std::sqrt(var);
  std::vector<double> out(adv.size());
  for (std::size_t k = 0; k < adv.size(); ++k) out[k] = sd > 1e-12 ? (adv[k] - mean) / sd : adv[k] - mean;
  return out;
}

struct PpoConfig {
  double clip = 0.2;
  std::size_t epochs = 4;
  std::size_t minibatch = 256;
  double value_coef = 0.5;
  double prediction_coef = 1.0;
  double entropy_coef = 0.0;
  bool normalize_advantages = true;
  AdamConfig adam;
};

struct PpoLosses {
  double policy = 0.0;
  double value = 0.0;
  double prediction = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped surrogate, value and prediction losses over the transitions `idx` with the given
/// (already normalized) advantages. Adds the gradient into `grad` when non-null.
inline PpoLosses ppo_loss(const Network& net, const RolloutBatch& batch, const std::vector<double>& advantages,
                          const std::vector<std::size_t>& idx, TaskKind task, const PpoConfig& config,
                          Eigen::VectorXd* grad) {
  const auto B = static_cast<Eigen::Index>(idx.size());
  if (B == 0) throw Error("empty minibatch");
  const auto n_in = static_cast<Eigen::Index>(net.shape().inputs);
  Eigen::MatrixXd x(n_in, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& e = batch.encodings[idx[static_cast<std::size_t>(b)]];
    x.col(b) = Eigen::Map<const Eigen::VectorXd>(e.data(), n_in);
  }
  const auto cache = net.forward(x);
  const double inv_b = 1.0 / static_cast<double>(B);

  std::array<Eigen::MatrixXd, kNumHeads> d_out;
  d_out[0] = Eigen::MatrixXd::Zero(cache.output[0].rows(), B);
  d_out[1] = Eigen::MatrixXd::Zero(1, B);
  d_out[2] = Eigen::MatrixXd::Zero(cache.output[2].rows(), B);

  PpoLosses L;
  const double lo = 1.0 - config.clip, hi = 1.0 + config.clip;
  for (Eigen::Index b = 0; b < B; ++b) {
    const std::size_t t = idx[static_cast<std::size_t>(b)];
    const auto& mask = batch.masks[t];
    const auto logp = masked_log_softmax(cache.output[0].col(b).data(), mask);
    const Action a = batch.actions[t];
    const double A = advantages[t];
    const double ratio = std::exp(logp[a] - batch.log_probs[t]);
    const double unclipped = ratio * A;
    const double clipped = std::clamp(ratio, lo, hi) * A;
    const bool clip_active = (A > 0.0 && ratio > hi) || (A < 0.0 && ratio < lo);
    L.policy -= std::min(unclipped, clipped) * inv_b;
    L.clip_fraction += clip_active ? inv_b : 0.0;

    double entropy = 0.0;
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j] && std::isfinite(logp[j])) entropy -= std::exp(logp[j]) * logp[j];
    L.entropy += entropy * inv_b;

    if (grad) {
      const double g = clip_active ? 0.0 : -ratio * A * inv_b;  // d(loss)/d(log pi(a))
      for (std::size_t j = 0; j < mask.size(); ++j) {
        if (!mask[j]) continue;
        const double p = std::exp(logp[j]);
        double dz = g * ((j == a ? 1.0 : 0.0) - p);
        dz += config.entropy_coef * inv_b * p * (logp[j] + entropy);
        d_out[0](static_cast<Eigen::Index>(j), b) = dz;
      }
    }

    const double v = cache.output[1](0, b);
    const double verr = v - batch.returns[t];
    L.value += config.value_coef * verr * verr * inv_b;
    if (grad) d_out[1](0, b) = 2.0 * config.value_coef * verr * inv_b;

    if (config.prediction_coef != 0.0 && cache.output[2].rows() > 0) {
      const auto q = cache.output[2].col(b);
      if (task == TaskKind::kClassification) {
        const std::vector<double> logits(q.data(), q.data() + q.size());
        const auto p = softmax(logits);
        const auto y = static_cast<std::size_t>(batch.labels[t]);
        L.prediction -= config.prediction_coef * std::log(std::max(p[y], 1e-300)) * inv_b;
        if (grad)
          for (std::size_t k = 0; k < p.size(); ++k)
            d_out[2](static_cast<Eigen::Index>(k), b) = config.prediction_coef * (p[k] - (k == y ? 1.0 : 0.0)) * inv_b;
      } else {
        const auto& target = batch.targets[t];
        const auto* sel = batch.target_masks.empty() ? nullptr : &batch.target_masks[t];
        for (Eigen::Index k = 0; k < q.size(); ++k) {
          if (sel && !sel->empty() && !(*sel)[static_cast<std::size_t>(k)]) continue;
          const double e = q(k) - target[static_cast<std::size_t>(k)];
          L.prediction += config.prediction_coef * e * e * inv_b;
          if (grad) d_out[2](k, b) = 2.0 * config.prediction_coef * e * inv_b;
        }
      }
    }
  }
  L.total = L.policy + L.value + L.prediction - config.entropy_coef * L.entropy;
  if (grad) net.backward(cache, d_out, *grad);
  return L;
}

/// Several epochs of shuffled minibatch descent on the clipped objective.
inline PpoLosses ppo_update(Network& net, Adam& adam, const RolloutBatch& batch, TaskKind task, const PpoConfig& config,
                            Rng& rng) {
  if (batch.size() == 0) throw Error("empty rollout batch");
  const auto adv = config.normalize_advantages ? normalize_advantages(batch.advantages) : batch.advantages;
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  PpoLosses mean;
  std::size_t updates = 0;
  const std::size_t mb = std::max<std::size_t>(1, config.minibatch);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + mb)));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.num_params());
      const auto L = ppo_loss(net, batch, adv, idx, task, config, &grad);
      if (!std::isfinite(L.total) || !grad.allFinite()) throw Error("non-finite loss during update");
      adam.step(net.params(), std::move(grad));
      mean.policy += L.policy;
      mean.value += L.value;
      mean.prediction += L.prediction;
      mean.entropy += L.entropy;
      mean.total += L.total;
      mean.clip_fraction += L.clip_fraction;
      ++updates;
    }
  }
  const double inv = 1.0 / static_cast<double>(updates);
  mean.policy *= inv;
  mean.value *= inv;
  mean.prediction *= inv;
  mean.entropy *= inv;
  mean.total *= inv;
  mean.clip_fraction *= inv;
  return mean;
}

}  // namespace gsmrl
