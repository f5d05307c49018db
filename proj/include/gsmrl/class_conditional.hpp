#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <vector>

#include "gsmrl/data.hpp"
#include "gsmrl/gaussian.hpp"
#include "gsmrl/surrogate.hpp"

namespace gsmrl {

/// Per-class quantities at a state: posterior P(y | x_o) and the class conditionals p(x_u | y, x_o).
struct ClassView {
  std::vector<double> posterior;
  std::vector<ConditionalGaussian> conditionals;
};

/// Bayes-rule classifier with full-covariance Gaussian class conditionals.
class ClassConditionalSurrogate final : public Surrogate {
 public:
  ClassConditionalSurrogate(std::vector<double> priors, std::vector<ConditionalGaussian> classes, double ridge)
      : priors_(std::move(priors)), classes_(std::move(classes)), ridge_(ridge) {
    if (priors_.size() != classes_.size() || priors_.empty()) throw Error("class model count mismatch");
    d_ = classes_.front().size();
  }

  std::string kind() const override { return "class-conditional"; }
  TaskKind task() const override { return TaskKind::kClassification; }
  std::size_t num_features() const override { return d_; }
  std::size_t num_classes() const override { return priors_.size(); }
  double ridge() const noexcept { return ridge_; }
  std::span<const double> priors() const noexcept { return priors_; }
  const ConditionalGaussian& class_model(std::size_t y) const { return classes_.at(y); }
  std::vector<std::string> fit_warnings;

  /// softmax_y(log p(x_o | y) + log P(y)) together with the conditionals of the unobserved features.
  ClassView view(const AcquisitionState& state) const {
    const auto idx = state.observed_indices();
    const auto vals = state.observed_values();
    ClassView v;
    std::vector<double> logits(priors_.size());
    v.conditionals.reserve(priors_.size());
    for (std::size_t y = 0; y < priors_.size(); ++y) {
      auto [cond, score] = condition_and_score(classes_[y], idx, vals);
      logits[y] = (priors_[y] > 0.0 ? std::log(priors_[y]) : -std::numeric_limits<double>::infinity()) + score;
      v.conditionals.push_back(std::move(cond));
    }
    v.posterior = idx.empty() ? priors_ : softmax(logits);
    return v;
  }

  std::vector<double> posterior(const AcquisitionState& state) const { return view(state).posterior; }

  Prediction predict(const AcquisitionState& state) const override {
    return Prediction::categorical(posterior(state));
  }

  void impute(const AcquisitionState& state, std::vector<double>& mean, std::vector<double>& sd) const override {
    const auto v = view(state);
    mean = state.dense();
    sd.assign(d_, 0.0);
    const auto& u = v.conditionals.front().indices;
    for (std::size_t k = 0; k < u.size(); ++k) {
      double m = 0.0, second = 0.0;
      for (std::size_t y = 0; y < priors_.size(); ++y) {
        const double my = v.conditionals[y].mean(k);
        m += v.posterior[y] * my;
        second += v.posterior[y] * (v.conditionals[y].covariance(k, k) + my * my);
      }
      mean[u[k]] = m;
      sd[u[k]] = std::sqrt(std::max(second - m * m, 0.0));
    }
  }

  /// Gaussian-approximation utility H(x_i | x_o) - sum_y P(y|x_o) H(x_i | y, x_o) for every
  /// unobserved feature, from a precomputed view. The mixture variance uses the law of total variance.
  std::vector<double> fast_utilities(const ClassView& v, std::size_t* floored_count = nullptr) const {
    std::vector<double> out(d_, 0.0);
    const auto& u = v.conditionals.front().indices;
    for (std::size_t k = 0; k < u.size(); ++k) {
      double m = 0.0, second = 0.0, cond_entropy = 0.0;
      bool floored = false;
      for (std::size_t y = 0; y < priors_.size(); ++y) {
        const double my = v.conditionals[y].mean(k);
        const double vy = v.conditionals[y].covariance(k, k);
        m += v.posterior[y] * my;
        second += v.posterior[y] * (vy + my * my);
        if (v.posterior[y] > 0.0) cond_entropy += v.posterior[y] * gaussian_entropy(vy, &floored);
      }
      const double mix_var = second - m * m;
      const double util = gaussian_entropy(mix_var, &floored) - cond_entropy;
      if (floored && floored_count) ++*floored_count;
      out[u[k]] = std::max(util, 0.0);
    }
    return out;
  }

  /// Eq.-8 style Monte Carlo estimate of E_{p(x_i|x_o)} KL[P(y|x_i,x_o) || P(y|x_o)].
  MonteCarloEstimate mc_utility(const ClassView& v, std::size_t i, std::size_t n_samples, Rng& rng) const {
    const auto pos = v.conditionals.front().position(i);
    if (pos < 0) throw Error("feature " + std::to_string(i) + " is not a candidate");
    const std::size_t K = priors_.size();
    std::vector<double> samples;
    samples.reserve(n_samples);
    std::vector<double> logits(K);
    for (std::size_t s = 0; s < n_samples; ++s) {
      const std::size_t y = rng.categorical(v.posterior);
      const double x = rng.normal(v.conditionals[y].mean(pos), std::sqrt(std::max(v.conditionals[y].covariance(pos, pos), 0.0)));
      for (std::size_t c = 0; c < K; ++c) {
        logits[c] = v.posterior[c] > 0.0
                        ? std::log(v.posterior[c]) +
                              normal_log_pdf(x, v.conditionals[c].mean(pos), v.conditionals[c].covariance(pos, pos))
                        : -std::numeric_limits<double>::infinity();
      }
      const auto post = softmax(logits);
      samples.push_back(categorical_kl(post, v.posterior));
    }
    return MonteCarloEstimate::from_samples(samples);
  }

  std::vector<double> utilities(const AcquisitionState& state, const std::vector<bool>& candidates,
                                const SideInfoConfig& config, Rng& rng) const override {
    const auto v = view(state);
    std::vector<double> out;
    if (config.class_utility == ClassUtility::kFast) {
      out = fast_utilities(v);
    } else {
      out.assign(d_, 0.0);
      for (std::size_t i = 0; i < d_; ++i)
        if (!state.observed(i) && candidates[i]) out[i] = mc_utility(v, i, config.mc_samples, rng).value;
    }
    for (std::size_t i = 0; i < d_; ++i)
      if (!candidates[i] || state.observed(i)) out[i] = 0.0;
    return out;
  }

  double potential(const AcquisitionState& state, const Instance&) const override {
    return -categorical_entropy(posterior(state));
  }

  void save(std::ostream& out) const override {
    out << std::setprecision(17);
    out << "gsmrl-surrogate 1\nkind class-conditional\nd " << d_ << "\nclasses " << priors_.size() << "\nridge "
        << ridge_ << "\npriors";
    for (double p : priors_) out << ' ' << p;
    out << '\n';
    for (std::size_t y = 0; y < classes_.size(); ++y) {
      out << "class " << y << "\nmean";
      for (Eigen::Index i = 0; i < classes_[y].mean.size(); ++i) out << ' ' << classes_[y].mean(i);
      out << "\ncov\n";
      for (Eigen::Index r = 0; r < classes_[y].covariance.rows(); ++r) {
        for (Eigen::Index c = 0; c < classes_[y].covariance.cols(); ++c)
          out << (c ? " " : "") << classes_[y].covariance(r, c);
        out << '\n';
      }
    }
  }

 private:
  std::vector<double> priors_;
  std::vector<ConditionalGaussian> classes_;
  double ridge_;
  std::size_t d_ = 0;
};

namespace detail {

inline ConditionalGaussian full_block(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  ConditionalGaussian g;
  g.indices.resize(static_cast<std::size_t>(mean.size()));
  std::iota(g.indices.begin(), g.indices.end(), 0);
  g.mean = std::move(mean);
  g.covariance = std::move(cov);
  return g;
}

/// Mean and unbiased covariance of the given rows.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(const std::vector<Eigen::VectorXd>& rows, std::size_t dim) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  if (rows.empty()) return {mean, cov};
  for (const auto& r : rows) mean += r;
  mean /= static_cast<double>(rows.size());
  if (rows.size() > 1) {
    for (const auto& r : rows) {
      const Eigen::VectorXd z = r - mean;
      cov.noalias() += z * z.transpose();
    }
    cov /= static_cast<double>(rows.size() - 1);
  }
  return {mean, cov};
}

inline void add_ridge_checked(Eigen::MatrixXd& cov, double ridge, int class_id) {
  cov.diagonal().array() += ridge;
  cov = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !cov.allFinite())
    throw FitError("singular covariance after ridge" +
                       (class_id >= 0 ? " for class " + std::to_string(class_id) : std::string()),
                   class_id);
}

}  // namespace detail

/// Empirical priors and per-class moments on the given split. Classes with fewer than d+1
/// samples are shrunk toward the pooled within-class covariance (a warning is recorded).
inline ClassConditionalSurrogate fit_class_conditional(const Dataset& ds, SplitTag split = SplitTag::kTrain,
                                                       double ridge = 1e-4) {
  const auto rows = ds.view(split);
  if (rows.empty()) throw Error("no data");
  const std::size_t K = ds.num_classes;
  const std::size_t d = ds.d;
  std::vector<std::vector<Eigen::VectorXd>> by_class(K);
  for (const Instance* inst : rows) {
    if (inst->label < 0 || static_cast<std::size_t>(inst->label) >= K) throw Error("label out of range");
    by_class[static_cast<std::size_t>(inst->label)].push_back(
        Eigen::Map<const Eigen::VectorXd>(inst->features.data(), static_cast<Eigen::Index>(d)));
  }
  std::vector<double> priors(K);
  std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> stats;
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::size_t pooled_dof = 0;
  for (std::size_t y = 0; y < K; ++y) {
    if (by_class[y].empty()) throw FitError("class " + std::to_string(y) + " has no samples", static_cast<int>(y));
    priors[y] = static_cast<double>(by_class[y].size()) / static_cast<double>(rows.size());
    stats.push_back(detail::moments(by_class[y], d));
    if (by_class[y].size() > 1) {
      pooled += stats.back().second * static_cast<double>(by_class[y].size() - 1);
      pooled_dof += by_class[y].size() - 1;
    }
  }
  if (pooled_dof > 0) pooled /= static_cast<double>(pooled_dof);
  std::vector<std::string> warnings;
  std::vector<ConditionalGaussian> classes;
  for (std::size_t y = 0; y < K; ++y) {
    auto [mean, cov] = stats[y];
    const std::size_t n = by_class[y].size();
    if (n < d + 1) {
      const double keep = static_cast<double>(n) / static_cast<double>(d + 1);
      cov = keep * cov + (1.0 - keep) * pooled;
      warnings.push_back("class " + std::to_string(y) + " has " + std::to_string(n) +
                         " samples (< d+1); covariance shrunk toward pooled");
    }
    detail::add_ridge_checked(cov, ridge, static_cast<int>(y));
    classes.push_back(detail::full_block(std::move(mean), std::move(cov)));
  }
  ClassConditionalSurrogate model(std::move(priors), std::move(classes), ridge);
  model.fit_warnings = std::move(warnings);
  return model;
}

}  // namespace gsmrl
