#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <vector>

#include "gsmrl/class_conditional.hpp"
#include "gsmrl/data.hpp"
#include "gsmrl/gaussian.hpp"
#include "gsmrl/surrogate.hpp"

namespace gsmrl {

/// Joint Gaussian over (x, y) for regression (target coordinates d..d+m-1) or over x alone for AIR.
class JointGaussianSurrogate final : public Surrogate {
 public:
  JointGaussianSurrogate(TaskKind task, std::size_t d, ConditionalGaussian joint, double ridge)
      : task_(task), d_(d), joint_(std::move(joint)), ridge_(ridge) {
    if (task_ == TaskKind::kClassification) throw Error("joint Gaussian surrogate is for regression or AIR");
    if (joint_.size() < d_) throw Error("joint block smaller than the feature count");
    if (task_ == TaskKind::kAir && joint_.size() != d_) throw Error("AIR joint block must cover features only");
  }

  std::string kind() const override { return "joint-gaussian"; }
  TaskKind task() const override { return task_; }
  std::size_t num_features() const override { return d_; }
  std::size_t target_dim() const override { return joint_.size() - d_; }
  double ridge() const noexcept { return ridge_; }
  const ConditionalGaussian& joint() const noexcept { return joint_; }

  std::vector<std::size_t> target_indices() const {
    std::vector<std::size_t> t;
    for (std::size_t k = d_; k < joint_.size(); ++k) t.push_back(k);
    return t;
  }

  /// Conditional over every coordinate not in o (unobserved features and, for regression, targets).
  ConditionalGaussian condition_on(const AcquisitionState& state) const {
    const auto idx = state.observed_indices();
    const auto vals = state.observed_values();
    return condition(joint_, idx, vals);
  }

  Prediction predict(const AcquisitionState& state) const override {
    const auto cond = condition_on(state);
    if (task_ == TaskKind::kRegression) {
      const auto target = marginal(cond, target_indices());
      std::vector<double> mean(target.size()), sd(target.size());
      for (std::size_t k = 0; k < target.size(); ++k) {
        mean[k] = target.mean(static_cast<Eigen::Index>(k));
        sd[k] = std::sqrt(std::max(target.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)), 0.0));
      }
      return Prediction::gaussian(std::move(mean), std::move(sd));
    }
    std::vector<double> mean, sd;
    fill_imputation(state, cond, mean, sd);
    return Prediction::gaussian(std::move(mean), std::move(sd));
  }

  void impute(const AcquisitionState& state, std::vector<double>& mean, std::vector<double>& sd) const override {
    fill_imputation(state, condition_on(state), mean, sd);
  }

  /// Eq.-6 estimator: E_{p(y, x_i | x_o)} [log p(y | x_i, x_o) - log p(y | x_o)] by joint sampling.
  MonteCarloEstimate mc_utility(const AcquisitionState& state, std::size_t i, std::size_t n_samples, Rng& rng) const {
    if (task_ != TaskKind::kRegression) throw Error("regression utility requires a regression surrogate");
    if (i >= d_ || state.observed(i)) throw Error("feature " + std::to_string(i) + " is not a candidate");
    const auto cond = condition_on(state);
    std::vector<std::size_t> keep = {i};
    for (auto t : target_indices()) keep.push_back(t);
    const auto block = marginal(cond, keep);  // (x_i, y) | x_o
    const auto target_prior = marginal(cond, target_indices());
    const auto m = static_cast<Eigen::Index>(target_dim());
    Eigen::LLT<Eigen::MatrixXd> chol(block.covariance);
    const Eigen::MatrixXd l = chol.matrixL();
    // y | x_i, x_o is linear-Gaussian in x_i: precompute its gain and covariance.
    const double var_i = block.covariance(0, 0);
    const Eigen::VectorXd cov_yi = block.covariance.block(1, 0, m, 1);
    const Eigen::MatrixXd post_cov = block.covariance.block(1, 1, m, m) - cov_yi * cov_yi.transpose() / var_i;
    ConditionalGaussian post;
    post.indices = target_indices();
    post.covariance = post_cov;
    std::vector<double> samples;
    samples.reserve(n_samples);
    Eigen::VectorXd z(block.size());
    for (std::size_t s = 0; s < n_samples; ++s) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
      const Eigen::VectorXd draw = block.mean + l * z;
      const double xi = draw(0);
      const Eigen::VectorXd y = draw.tail(m);
      post.mean = block.mean.tail(m) + cov_yi * ((xi - block.mean(0)) / var_i);
      samples.push_back(log_density(post, y) - log_density(target_prior, y));
    }
    return MonteCarloEstimate::from_samples(samples);
  }

  /// H(x_i | x_o) under the Gaussian conditional (AIR utility).
  double conditional_entropy(const AcquisitionState& state, std::size_t i, bool* floored = nullptr) const {
    if (i >= d_ || state.observed(i)) throw Error("feature " + std::to_string(i) + " is not a candidate");
    const auto cond = condition_on(state);
    const auto pos = cond.position(i);
    return gaussian_entropy(cond.covariance(pos, pos), floored);
  }

  std::vector<double> utilities(const AcquisitionState& state, const std::vector<bool>& candidates,
                                const SideInfoConfig& config, Rng& rng) const override {
    std::vector<double> out(d_, 0.0);
    if (task_ == TaskKind::kAir) {
      const auto cond = condition_on(state);
      for (std::size_t i = 0; i < d_; ++i) {
        if (state.observed(i) || !candidates[i]) continue;
        const auto pos = cond.position(i);
        out[i] = gaussian_entropy(cond.covariance(pos, pos));
      }
      return out;
    }
    for (std::size_t i = 0; i < d_; ++i)
      if (!state.observed(i) && candidates[i]) out[i] = mc_utility(state, i, config.mc_samples, rng).value;
    return out;
  }

  /// -log p(x_u | x_o) / |u| at the true values (AIR); 0 when nothing is left.
  double per_dimension_nll(const AcquisitionState& state, const Instance& truth) const {
    const auto cond = condition_on(state);
    if (cond.size() == 0) return 0.0;
    Eigen::VectorXd x(static_cast<Eigen::Index>(cond.size()));
    for (std::size_t k = 0; k < cond.size(); ++k) x(static_cast<Eigen::Index>(k)) = truth.features.at(cond.indices[k]);
    return -log_density(cond, x) / static_cast<double>(cond.size());
  }

  double potential(const AcquisitionState& state, const Instance& truth) const override {
    if (task_ == TaskKind::kAir) return -per_dimension_nll(state, truth);
    return -block_entropy(marginal(condition_on(state), target_indices()));
  }

  void save(std::ostream& out) const override {
    out << std::setprecision(17);
    out << "gsmrl-surrogate 1\nkind joint-gaussian\ntask " << to_string(task_) << "\nd " << d_ << "\ntargets "
        << target_dim() << "\nridge " << ridge_ << "\nmean";
    for (Eigen::Index i = 0; i < joint_.mean.size(); ++i) out << ' ' << joint_.mean(i);
    out << "\ncov\n";
    for (Eigen::Index r = 0; r < joint_.covariance.rows(); ++r) {
      for (Eigen::Index c = 0; c < joint_.covariance.cols(); ++c) out << (c ? " " : "") << joint_.covariance(r, c);
      out << '\n';
    }
  }

 private:
  void fill_imputation(const AcquisitionState& state, const ConditionalGaussian& cond, std::vector<double>& mean,
                       std::vector<double>& sd) const {
    mean = state.dense();
    sd.assign(d_, 0.0);
    for (std::size_t k = 0; k < cond.size(); ++k) {
      const std::size_t idx = cond.indices[k];
      if (idx >= d_) continue;
      const auto e = static_cast<Eigen::Index>(k);
      mean[idx] = cond.mean(e);
      sd[idx] = std::sqrt(std::max(cond.covariance(e, e), 0.0));
    }
  }

  TaskKind task_;
  std::size_t d_;
  ConditionalGaussian joint_;
  double ridge_;
};

/// Moments of (x, y) (regression) or x (AIR) on the given split, plus ridge.
inline JointGaussianSurrogate fit_joint_gaussian(const Dataset& ds, SplitTag split = SplitTag::kTrain,
                                                 double ridge = 1e-4) {
  const auto rows = ds.view(split);
  if (rows.empty()) throw Error("no data");
  const std::size_t m = ds.task == TaskKind::kRegression ? ds.target_dim : 0;
  const std::size_t dim = ds.d + m;
  std::vector<Eigen::VectorXd> data;
  data.reserve(rows.size());
  for (const Instance* inst : rows) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < ds.d; ++i) v(static_cast<Eigen::Index>(i)) = inst->features[i];
    for (std::size_t j = 0; j < m; ++j) v(static_cast<Eigen::Index>(ds.d + j)) = inst->target.at(j);
    data.push_back(std::move(v));
  }
  auto [mean, cov] = detail::moments(data, dim);
  detail::add_ridge_checked(cov, ridge, -1);
  return JointGaussianSurrogate(ds.task, ds.d, detail::full_block(std::move(mean), std::move(cov)), ridge);
}

}  // namespace gsmrl
