#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "gsmrl/data.hpp"
#include "gsmrl/random.hpp"

namespace gsmrl {

enum class SyntheticKind { kGaussMixCls, kLinearReg, kCorrelatedAir, kXorCls, kHeterogeneousCls };

inline const char* to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kGaussMixCls: return "gauss-mix-cls";
    case SyntheticKind::kLinearReg: return "linear-reg";
    case SyntheticKind::kCorrelatedAir: return "correlated-air";
    case SyntheticKind::kXorCls: return "xor-cls";
    case SyntheticKind::kHeterogeneousCls: return "heterogeneous-cls";
  }
  return "?";
}

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "gauss-mix-cls") return SyntheticKind::kGaussMixCls;
  if (s == "linear-reg") return SyntheticKind::kLinearReg;
  if (s == "correlated-air") return SyntheticKind::kCorrelatedAir;
  if (s == "xor-cls") return SyntheticKind::kXorCls;
  if (s == "heterogeneous-cls") return SyntheticKind::kHeterogeneousCls;
  throw ConfigError("unknown synthetic generator '" + s + "'");
}

/// Generator description. `params` holds generator-specific knobs (see make_synthetic);
/// unset knobs take the documented defaults.
struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kGaussMixCls;
  std::size_t d = 8;
  std::size_t num_classes = 2;
  std::size_t n = 5000;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

/// Analytic quantities that come with a generated dataset.
struct OracleRecord {
  std::vector<double> feature_mi;  // I(x_i; y) per feature (nats), where defined
  std::optional<double> bayes_accuracy;
  std::optional<double> pair_conditional_mi;  // xor-cls: I(x_a; y | x_b)
  std::vector<std::size_t> informative;       // generator's informative indices
  std::map<std::string, double> extra;
};

/// I(x; y) for a 1-D mixture p(x | y) = N(means[y], sds[y]^2) with weights w, by composite Simpson quadrature.
inline double mixture_mutual_information_1d(std::span<const double> weights, std::span<const double> means,
                                            std::span<const double> sds, std::size_t intervals = 20000) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double h_cond = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    lo = std::min(lo, means[k] - 12.0 * sds[k]);
    hi = std::max(hi, means[k] + 12.0 * sds[k]);
    h_cond += weights[k] * 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * sds[k] * sds[k]);
  }
  if (intervals % 2) ++intervals;
  const double step = (hi - lo) / static_cast<double>(intervals);
  auto integrand = [&](double x) {
    double p = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double z = (x - means[k]) / sds[k];
      p += weights[k] * std::exp(-0.5 * z * z) / (sds[k] * std::sqrt(2.0 * std::numbers::pi));
    }
    return p > 0.0 ? -p * std::log(p) : 0.0;
  };
  double acc = integrand(lo) + integrand(hi);
  for (std::size_t j = 1; j < intervals; ++j) acc += (j % 2 ? 4.0 : 2.0) * integrand(lo + step * static_cast<double>(j));
  const double h_marginal = acc * step / 3.0;
  return h_marginal - h_cond;
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Generators (defaults in brackets):
///  gauss-mix-cls: K=2, y uniform; the first `informative` [d/2] dims are N(+-mu [1.0], 1), the rest N(0,1).
///  linear-reg: x ~ N(0, I), y = w.x + N(0, noise^2 [0.5]); w_i = 1/(i+1) on the first `informative` [d/2] dims.
///  correlated-air: x ~ N(0, S), S_ij = rho^|i-j| [rho 0.8].
///  xor-cls: bits a, b ~ Bern(1/2), y = a xor b; x_{d-2} = a + N(0, bit_noise^2 [0.1]),
///           x_{d-1} = b + N(0, bit_noise^2); the other dims are weak cues N(+-weak [0.25], 1).
///  heterogeneous-cls: K = groups, d = 1 + K*block; x_0 ~ N(router [1.5] * y, 1) routes among classes;
///           block g (dims 1+g*block .. g*block+block) is N(block_sep [1.5], 1) if y == g else N(0, 1).
inline std::pair<Dataset, OracleRecord> make_synthetic(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  std::vector<Instance> rows;
  rows.reserve(spec.n);
  OracleRecord oracle;
  TaskKind task = TaskKind::kClassification;
  std::size_t d = spec.d;
  std::size_t K = spec.num_classes;

  switch (spec.kind) {
    case SyntheticKind::kGaussMixCls: {
      K = 2;
      const double mu = spec.param("mu", 1.0);
      const auto informative = static_cast<std::size_t>(spec.param("informative", static_cast<double>(d / 2)));
      for (std::size_t r = 0; r < spec.n; ++r) {
        Instance inst;
        inst.label = static_cast<int>(rng.index(2));
        const double sign = inst.label == 1 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < d; ++i) inst.features.push_back(rng.normal(i < informative ? sign * mu : 0.0, 1.0));
        rows.push_back(std::move(inst));
      }
      const double w[2] = {0.5, 0.5};
      const double s[2] = {1.0, 1.0};
      for (std::size_t i = 0; i < d; ++i) {
        if (i < informative) {
          const double m[2] = {-mu, mu};
          oracle.feature_mi.push_back(mixture_mutual_information_1d(w, m, s));
          oracle.informative.push_back(i);
        } else {
          oracle.feature_mi.push_back(0.0);
        }
      }
      oracle.bayes_accuracy = standard_normal_cdf(mu * std::sqrt(static_cast<double>(informative)));
      break;
    }
    case SyntheticKind::kLinearReg: {
      task = TaskKind::kRegression;
      K = 0;
      const double noise = spec.param("noise", 0.5);
      const auto informative = static_cast<std::size_t>(spec.param("informative", static_cast<double>(d / 2)));
      std::vector<double> w(d, 0.0);
      for (std::size_t i = 0; i < informative && i < d; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
      double var_y = noise * noise;
      for (double wi : w) var_y += wi * wi;
      for (std::size_t r = 0; r < spec.n; ++r) {
        Instance inst;
        double y = rng.normal(0.0, noise);
        for (std::size_t i = 0; i < d; ++i) {
          inst.features.push_back(rng.normal());
          y += w[i] * inst.features.back();
        }
        inst.target = {y};
        rows.push_back(std::move(inst));
      }
      for (std::size_t i = 0; i < d; ++i) {
        const double rho2 = w[i] * w[i] / var_y;
        oracle.feature_mi.push_back(-0.5 * std::log(1.0 - rho2));
        if (w[i] != 0.0) oracle.informative.push_back(i);
      }
      oracle.extra["r_squared"] = 1.0 - noise * noise / var_y;
      break;
    }
    case SyntheticKind::kCorrelatedAir: {
      task = TaskKind::kAir;
      K = 0;
      const double rho = spec.param("rho", 0.8);
      // AR(1) recursion gives S_ij = rho^|i-j| with unit marginals.
      for (std::size_t r = 0; r < spec.n; ++r) {
        Instance inst;
        double prev = rng.normal();
        inst.features.push_back(prev);
        for (std::size_t i = 1; i < d; ++i) {
          prev = rho * prev + std::sqrt(1.0 - rho * rho) * rng.normal();
          inst.features.push_back(prev);
        }
        rows.push_back(std::move(inst));
      }
      oracle.extra["rho"] = rho;
      // Interior features given both neighbours: var = (1 - rho^2) / (1 + rho^2).
      oracle.extra["interior_conditional_variance"] = (1.0 - rho * rho) / (1.0 + rho * rho);
      break;
    }
    case SyntheticKind::kXorCls: {
      K = 2;
      if (d < 3) throw ConfigError("xor-cls needs d >= 3");
      const double bit_noise = spec.param("bit_noise", 0.1);
      const double weak = spec.param("weak", 0.25);
      const std::size_t ia = d - 2;
      const std::size_t ib = d - 1;
      for (std::size_t r = 0; r < spec.n; ++r) {
        Instance inst;
        const int a = static_cast<int>(rng.index(2));
        const int b = static_cast<int>(rng.index(2));
        inst.label = a ^ b;
        const double sign = inst.label == 1 ? 1.0 : -1.0;
        inst.features.resize(d);
        for (std::size_t i = 0; i < d - 2; ++i) inst.features[i] = rng.normal(sign * weak, 1.0);
        inst.features[ia] = a + rng.normal(0.0, bit_noise);
        inst.features[ib] = b + rng.normal(0.0, bit_noise);
        rows.push_back(std::move(inst));
      }
      // Exact enumeration over (a, b, y): I(a; y) and I(a; y | b).
      double mi_single = 0.0;
      double mi_pair = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int y = 0; y < 2; ++y) {
          double p_ay = 0.0;
          for (int b = 0; b < 2; ++b) p_ay += ((a ^ b) == y) ? 0.25 : 0.0;
          if (p_ay > 0) mi_single += p_ay * std::log(p_ay / (0.5 * 0.5));
          for (int b = 0; b < 2; ++b) {
            const double p_aby = ((a ^ b) == y) ? 0.25 : 0.0;
            if (p_aby == 0.0) continue;
            // p(a,y|b) / (p(a|b) p(y|b)) with p(b)=1/2, p(a|b)=1/2, p(y|b)=1/2
            mi_pair += p_aby * std::log((p_aby / 0.5) / (0.5 * 0.5));
          }
        }
      }
      const double w[2] = {0.5, 0.5};
      const double s[2] = {1.0, 1.0};
      const double m[2] = {-weak, weak};
      const double weak_mi = mixture_mutual_information_1d(w, m, s);
      for (std::size_t i = 0; i < d - 2; ++i) oracle.feature_mi.push_back(weak_mi);
      oracle.feature_mi.push_back(mi_single);
      oracle.feature_mi.push_back(mi_single);
      oracle.pair_conditional_mi = mi_pair;
      oracle.informative = {ia, ib};
      break;
    }
    case SyntheticKind::kHeterogeneousCls: {
      const auto block = static_cast<std::size_t>(spec.param("block", 3.0));
      const double router = spec.param("router", 1.5);
      const double block_sep = spec.param("block_sep", 1.5);
      d = 1 + K * block;
      for (std::size_t r = 0; r < spec.n; ++r) {
        Instance inst;
        const auto y = rng.index(K);
        inst.label = static_cast<int>(y);
        inst.features.resize(d);
        inst.features[0] = rng.normal(router * static_cast<double>(y), 1.0);
        for (std::size_t g = 0; g < K; ++g)
          for (std::size_t j = 0; j < block; ++j) inst.features[1 + g * block + j] = rng.normal(g == y ? block_sep : 0.0, 1.0);
        rows.push_back(std::move(inst));
      }
      std::vector<double> w(K, 1.0 / static_cast<double>(K));
      std::vector<double> s(K, 1.0);
      std::vector<double> m(K);
      for (std::size_t y = 0; y < K; ++y) m[y] = router * static_cast<double>(y);
      oracle.feature_mi.push_back(mixture_mutual_information_1d(w, m, s));
      // A block feature is N(sep,1) w.p. 1/K else N(0,1).
      const double wb[2] = {1.0 / static_cast<double>(K), 1.0 - 1.0 / static_cast<double>(K)};
      const double mb[2] = {block_sep, 0.0};
      const double sb[2] = {1.0, 1.0};
      const double block_mi = mixture_mutual_information_1d(wb, mb, sb);
      for (std::size_t i = 1; i < d; ++i) oracle.feature_mi.push_back(block_mi);
      for (std::size_t i = 0; i < d; ++i) oracle.informative.push_back(i);
      break;
    }
  }

  SplitFractions fractions;
  auto ds = make_dataset(std::string(to_string(spec.kind)), task, std::move(rows), K, fractions, mix64(spec.seed + 17));
  return {std::move(ds), std::move(oracle)};
}

}  // namespace gsmrl
