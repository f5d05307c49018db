#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <vector>

#include "gsmrl/data.hpp"
#include "gsmrl/surrogate.hpp"

namespace gsmrl {

/// Exact joint probability table over categorical features and a label. Feature values in
/// states are level indices stored as doubles. Every query is answered by enumeration.
class DiscreteExactSurrogate final : public Surrogate {
 public:
  static constexpr std::size_t kMaxConfigurations = 1u << 20;

  /// `table[y * S + code]`, code = sum_i x_i * stride_i with stride_0 = 1. For AIR pass K = 1.
  DiscreteExactSurrogate(TaskKind task, std::vector<std::size_t> levels, std::size_t num_classes,
                         std::vector<double> table)
      : task_(task), levels_(std::move(levels)), K_(num_classes), table_(std::move(table)) {
    if (task_ == TaskKind::kRegression) throw Error("discrete surrogate supports classification or AIR");
    if (K_ == 0) throw Error("discrete surrogate needs at least one class");
    strides_.resize(levels_.size());
    S_ = 1;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i] < 1) throw Error("feature levels must be >= 1");
      strides_[i] = S_;
      S_ *= levels_[i];
      if (S_ * K_ > kMaxConfigurations) throw Error("discrete table too large");
    }
    if (table_.size() != S_ * K_) throw Error("discrete table has wrong size");
    double total = 0.0;
    for (double p : table_) {
      if (!(p >= 0.0)) throw Error("discrete table entries must be >= 0");
      total += p;
    }
    if (!(total > 0.0)) throw Error("discrete table has no mass");
    for (double& p : table_) p /= total;
    digits_.assign(S_ * levels_.size(), 0);
    for (std::size_t code = 0; code < S_; ++code)
      for (std::size_t i = 0; i < levels_.size(); ++i)
        digits_[code * levels_.size() + i] = static_cast<std::uint8_t>((code / strides_[i]) % levels_[i]);
  }

  /// Dirichlet(concentration) draw over every table cell.
  static DiscreteExactSurrogate random(TaskKind task, std::vector<std::size_t> levels, std::size_t num_classes,
                                       Rng& rng, double concentration = 1.0) {
    std::size_t cells = num_classes;
    for (auto l : levels) cells *= l;
    std::vector<double> conc(cells, concentration);
    return DiscreteExactSurrogate(task, std::move(levels), num_classes, rng.dirichlet(conc));
  }

  std::string kind() const override { return "discrete-exact"; }
  TaskKind task() const override { return task_; }
  std::size_t num_features() const override { return levels_.size(); }
  std::size_t num_classes() const override { return task_ == TaskKind::kClassification ? K_ : 0; }
  std::size_t label_cardinality() const noexcept { return K_; }
  std::span<const std::size_t> levels() const noexcept { return levels_; }
  std::span<const double> table() const noexcept { return table_; }
  std::size_t feature_configurations() const noexcept { return S_; }

  std::size_t level_of(double v, std::size_t i) const {
    const auto l = std::llround(v);
    if (l < 0 || static_cast<std::size_t>(l) >= levels_[i] || std::abs(v - static_cast<double>(l)) > 1e-9)
      throw Error("value " + std::to_string(v) + " is not a level of feature " + std::to_string(i));
    return static_cast<std::size_t>(l);
  }

  std::size_t digit(std::size_t code, std::size_t i) const { return digits_[code * levels_.size() + i]; }

  bool consistent(std::size_t code, const AcquisitionState& state) const {
    for (const auto& e : state.entries())
      if (digit(code, e.index) != static_cast<std::size_t>(std::llround(e.value))) return false;
    return true;
  }

  /// P(x_o) under the table.
  double evidence(const AcquisitionState& state) const {
    double total = 0.0;
    for (std::size_t code = 0; code < S_; ++code) {
      if (!consistent(code, state)) continue;
      for (std::size_t y = 0; y < K_; ++y) total += table_[y * S_ + code];
    }
    return total;
  }

  /// P(y | x_o).
  std::vector<double> posterior(const AcquisitionState& state) const {
    for (const auto& e : state.entries()) level_of(e.value, e.index);
    std::vector<double> p(K_, 0.0);
    for (std::size_t code = 0; code < S_; ++code) {
      if (!consistent(code, state)) continue;
      for (std::size_t y = 0; y < K_; ++y) p[y] += table_[y * S_ + code];
    }
    double total = 0.0;
    for (double v : p) total += v;
    if (!(total > 0.0)) throw Error("observation has zero probability under the table");
    for (double& v : p) v /= total;
    return p;
  }

  /// P(y, x_i = v | x_o) as a K x L_i row-major matrix.
  std::vector<double> feature_joint(const AcquisitionState& state, std::size_t i) const {
    if (i >= levels_.size() || state.observed(i)) throw Error("feature " + std::to_string(i) + " is not a candidate");
    const std::size_t L = levels_[i];
    std::vector<double> p(K_ * L, 0.0);
    double total = 0.0;
    for (std::size_t code = 0; code < S_; ++code) {
      if (!consistent(code, state)) continue;
      const std::size_t v = digit(code, i);
      for (std::size_t y = 0; y < K_; ++y) {
        p[y * L + v] += table_[y * S_ + code];
        total += table_[y * S_ + code];
      }
    }
    if (!(total > 0.0)) throw Error("observation has zero probability under the table");
    for (double& v : p) v /= total;
    return p;
  }

  /// P(x_i = v | x_o) for every level v.
  std::vector<double> feature_marginal(const AcquisitionState& state, std::size_t i) const {
    const auto joint = feature_joint(state, i);
    const std::size_t L = levels_[i];
    std::vector<double> p(L, 0.0);
    for (std::size_t y = 0; y < K_; ++y)
      for (std::size_t v = 0; v < L; ++v) p[v] += joint[y * L + v];
    return p;
  }

  /// I(x_i; y | x_o) as E_{x_i} KL[P(y | x_i, x_o) || P(y | x_o)].
  double mutual_information(const AcquisitionState& state, std::size_t i) const {
    const auto joint = feature_joint(state, i);
    const std::size_t L = levels_[i];
    std::vector<double> py(K_, 0.0), px(L, 0.0);
    for (std::size_t y = 0; y < K_; ++y)
      for (std::size_t v = 0; v < L; ++v) {
        py[y] += joint[y * L + v];
        px[v] += joint[y * L + v];
      }
    double mi = 0.0;
    std::vector<double> cond(K_);
    for (std::size_t v = 0; v < L; ++v) {
      if (px[v] <= 0.0) continue;
      for (std::size_t y = 0; y < K_; ++y) cond[y] = joint[y * L + v] / px[v];
      mi += px[v] * categorical_kl(cond, py);
    }
    return mi;
  }

  /// The same quantity through H(x_i | x_o) - E_{P(y|x_o)} H(x_i | y, x_o).
  double mutual_information_feature_form(const AcquisitionState& state, std::size_t i) const {
    const auto joint = feature_joint(state, i);
    const std::size_t L = levels_[i];
    std::vector<double> px(L, 0.0);
    for (std::size_t y = 0; y < K_; ++y)
      for (std::size_t v = 0; v < L; ++v) px[v] += joint[y * L + v];
    double cond_entropy = 0.0;
    std::vector<double> row(L);
    for (std::size_t y = 0; y < K_; ++y) {
      double py = 0.0;
      for (std::size_t v = 0; v < L; ++v) py += joint[y * L + v];
      if (py <= 0.0) continue;
      for (std::size_t v = 0; v < L; ++v) row[v] = joint[y * L + v] / py;
      cond_entropy += py * categorical_entropy(row);
    }
    return categorical_entropy(px) - cond_entropy;
  }

  /// Monte Carlo version of the KL form: sample x_i ~ P(x_i | x_o), average the analytic KL.
  MonteCarloEstimate mc_utility(const AcquisitionState& state, std::size_t i, std::size_t n_samples, Rng& rng) const {
    const auto joint = feature_joint(state, i);
    const std::size_t L = levels_[i];
    std::vector<double> py(K_, 0.0), px(L, 0.0);
    for (std::size_t y = 0; y < K_; ++y)
      for (std::size_t v = 0; v < L; ++v) {
        py[y] += joint[y * L + v];
        px[v] += joint[y * L + v];
      }
    std::vector<double> kl_at(L, 0.0), cond(K_);
    for (std::size_t v = 0; v < L; ++v) {
      if (px[v] <= 0.0) continue;
      for (std::size_t y = 0; y < K_; ++y) cond[y] = joint[y * L + v] / px[v];
      kl_at[v] = categorical_kl(cond, py);
    }
    std::vector<double> samples(n_samples);
    for (auto& s : samples) s = kl_at[rng.categorical(px)];
    return MonteCarloEstimate::from_samples(samples);
  }

  /// log P(x_S = values | x_o) for the unobserved subset S.
  double conditional_log_prob(const AcquisitionState& state, std::span<const std::size_t> subset,
                              std::span<const double> values) const {
    double num = 0.0, den = 0.0;
    for (std::size_t code = 0; code < S_; ++code) {
      if (!consistent(code, state)) continue;
      double mass = 0.0;
      for (std::size_t y = 0; y < K_; ++y) mass += table_[y * S_ + code];
      den += mass;
      bool match = true;
      for (std::size_t k = 0; k < subset.size(); ++k)
        if (digit(code, subset[k]) != level_of(values[k], subset[k])) {
          match = false;
          break;
        }
      if (match) num += mass;
    }
    if (!(den > 0.0)) throw Error("observation has zero probability under the table");
    return std::log(num / den);
  }

  double per_dimension_nll(const AcquisitionState& state, const Instance& truth) const {
    const auto u = state.mask().unobserved();
    if (u.empty()) return 0.0;
    std::vector<double> vals;
    for (auto i : u) vals.push_back(truth.features.at(i));
    return -conditional_log_prob(state, u, vals) / static_cast<double>(u.size());
  }

  Prediction predict(const AcquisitionState& state) const override {
    if (task_ == TaskKind::kClassification) return Prediction::categorical(posterior(state));
    std::vector<double> mean, sd;
    impute(state, mean, sd);
    return Prediction::gaussian(std::move(mean), std::move(sd));
  }

  void impute(const AcquisitionState& state, std::vector<double>& mean, std::vector<double>& sd) const override {
    mean = state.dense();
    sd.assign(levels_.size(), 0.0);
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (state.observed(i)) continue;
      const auto p = feature_marginal(state, i);
      double m = 0.0, second = 0.0;
      for (std::size_t v = 0; v < p.size(); ++v) {
        m += p[v] * static_cast<double>(v);
        second += p[v] * static_cast<double>(v * v);
      }
      mean[i] = m;
      sd[i] = std::sqrt(std::max(second - m * m, 0.0));
    }
  }

  std::vector<double> utilities(const AcquisitionState& state, const std::vector<bool>& candidates,
                                const SideInfoConfig&, Rng&) const override {
    std::vector<double> out(levels_.size(), 0.0);
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (state.observed(i) || !candidates[i]) continue;
      out[i] = task_ == TaskKind::kClassification ? mutual_information(state, i)
                                                   : categorical_entropy(feature_marginal(state, i));
    }
    return out;
  }

  double potential(const AcquisitionState& state, const Instance& truth) const override {
    if (task_ == TaskKind::kAir) return -per_dimension_nll(state, truth);
    return -categorical_entropy(posterior(state));
  }

  /// Draws an instance from the table (feature levels as values).
  Instance sample(Rng& rng) const {
    const std::size_t flat = rng.categorical(table_);
    const std::size_t y = flat / S_;
    const std::size_t code = flat % S_;
    Instance inst;
    inst.features.resize(levels_.size());
    for (std::size_t i = 0; i < levels_.size(); ++i) inst.features[i] = static_cast<double>(digit(code, i));
    if (task_ == TaskKind::kClassification) inst.label = static_cast<int>(y);
    return inst;
  }

  void save(std::ostream& out) const override {
    out << std::setprecision(17);
    out << "gsmrl-surrogate 1\nkind discrete-exact\ntask " << to_string(task_) << "\nd " << levels_.size()
        << "\nclasses " << K_ << "\nlevels";
    for (auto l : levels_) out << ' ' << l;
    out << "\ntable\n";
    for (std::size_t k = 0; k < table_.size(); ++k) out << (k ? " " : "") << table_[k];
    out << '\n';
  }

 private:
  TaskKind task_;
  std::vector<std::size_t> levels_;
  std::size_t K_;
  std::vector<double> table_;
  std::vector<std::size_t> strides_;
  std::size_t S_ = 1;
  std::vector<std::uint8_t> digits_;
};

/// Empirical table (plus a pseudo-count per cell) from a dataset whose feature values are level indices.
/// Features are taken as stored, so the dataset must not be min-max normalized.
inline DiscreteExactSurrogate fit_discrete(const Dataset& ds, std::vector<std::size_t> levels,
                                           SplitTag split = SplitTag::kTrain, double pseudo_count = 0.0) {
  const auto rows = ds.view(split);
  if (rows.empty()) throw Error("no data");
  const std::size_t K = ds.task == TaskKind::kClassification ? ds.num_classes : 1;
  std::size_t S = 1;
  for (auto l : levels) S *= l;
  std::vector<double> table(S * K, pseudo_count);
  DiscreteExactSurrogate shape(ds.task, levels, K, std::vector<double>(S * K, 1.0));
  for (const Instance* inst : rows) {
    std::size_t code = 0, stride = 1;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      code += shape.level_of(inst->features[i], i) * stride;
      stride *= levels[i];
    }
    const std::size_t y = ds.task == TaskKind::kClassification ? static_cast<std::size_t>(inst->label) : 0;
    table[y * S + code] += 1.0;
  }
  return DiscreteExactSurrogate(ds.task, std::move(levels), K, std::move(table));
}

}  // namespace gsmrl
