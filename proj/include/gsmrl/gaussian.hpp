#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gsmrl/error.hpp"

namespace gsmrl {

inline constexpr double kVarianceFloor = 1e-12;

/// Differential entropy of a univariate Gaussian, 1/2 log(2 pi e var), with the variance floored.
inline double gaussian_entropy(double variance, bool* floored = nullptr) {
  if (variance < kVarianceFloor) {
    if (floored) *floored = true;
    variance = kVarianceFloor;
  }
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

/// Univariate normal log-density.
inline double normal_log_pdf(double x, double mean, double variance) {
  variance = std::max(variance, kVarianceFloor);
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + z * z / variance);
}

/// Multivariate normal over a labelled set of coordinates. `indices` are the
/// caller's coordinate ids (feature ids, or d+k for target dims), sorted ascending.
struct ConditionalGaussian {
  std::vector<std::size_t> indices;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  std::size_t size() const noexcept { return indices.size(); }

  /// Position of coordinate id `idx` in this block, or -1.
  std::ptrdiff_t position(std::size_t idx) const {
    auto it = std::lower_bound(indices.begin(), indices.end(), idx);
    if (it == indices.end() || *it != idx) return -1;
    return it - indices.begin();
  }
};

namespace detail {

inline Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const std::ptrdiff_t> rows,
                              std::span<const std::ptrdiff_t> cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = m(rows[r], cols[c]);
  return out;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const std::ptrdiff_t> rows) {
  Eigen::VectorXd out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out(r) = v(rows[r]);
  return out;
}

inline double condition_number(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.size() == 0) return 1.0;
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

inline Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    const double cond = condition_number(m);
    throw NumericalError("covariance block is not positive definite (condition estimate " +
                             std::to_string(cond) + ")",
                         cond);
  }
  return llt;
}

}  // namespace detail

/// Condition a Gaussian block on observed coordinates (ids must be members of `joint`).
/// Returns the Gaussian over the remaining coordinates:
///   mean_u + S_uo S_oo^-1 (x_o - mean_o),   S_uu - S_uo S_oo^-1 S_ou.
/// Also returns log N(x_o; mean_o, S_oo), sharing one factorization.
inline std::pair<ConditionalGaussian, double> condition_and_score(const ConditionalGaussian& joint,
                                                                 std::span<const std::size_t> observed,
                                                                 std::span<const double> values) {
  if (observed.size() != values.size()) throw Error("observed indices and values differ in length");
  std::vector<std::ptrdiff_t> o_pos;
  o_pos.reserve(observed.size());
  for (std::size_t idx : observed) {
    auto p = joint.position(idx);
    if (p < 0) throw Error("conditioning index " + std::to_string(idx) + " not in the joint block");
    o_pos.push_back(p);
  }
  ConditionalGaussian out;
  std::vector<std::ptrdiff_t> u_pos;
  for (std::size_t k = 0; k < joint.indices.size(); ++k) {
    if (std::find(o_pos.begin(), o_pos.end(), static_cast<std::ptrdiff_t>(k)) == o_pos.end()) {
      u_pos.push_back(static_cast<std::ptrdiff_t>(k));
      out.indices.push_back(joint.indices[k]);
    }
  }
  out.mean = detail::gather(joint.mean, u_pos);
  out.covariance = detail::gather(joint.covariance, u_pos, u_pos);
  if (o_pos.empty()) return {std::move(out), 0.0};

  const Eigen::MatrixXd s_oo = detail::gather(joint.covariance, o_pos, o_pos);
  Eigen::VectorXd resid(o_pos.size());
  for (std::size_t k = 0; k < o_pos.size(); ++k) resid(k) = values[k] - joint.mean(o_pos[k]);
  const auto llt = detail::factorize(s_oo);
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::VectorXd w = l.triangularView<Eigen::Lower>().solve(resid);
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double score = -0.5 * (static_cast<double>(o_pos.size()) * std::log(2.0 * std::numbers::pi) + logdet +
                               w.squaredNorm());
  if (!u_pos.empty()) {
    const Eigen::MatrixXd s_uo = detail::gather(joint.covariance, u_pos, o_pos);
    const Eigen::MatrixXd gain_t = llt.solve(s_uo.transpose());
    out.mean += gain_t.transpose() * resid;
    out.covariance -= s_uo * gain_t;
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  }
  return {std::move(out), score};
}

inline ConditionalGaussian condition(const ConditionalGaussian& joint, std::span<const std::size_t> observed,
                                     std::span<const double> values) {
  return condition_and_score(joint, observed, values).first;
}

/// Marginal of a block on a subset of its coordinates.
inline ConditionalGaussian marginal(const ConditionalGaussian& joint, std::span<const std::size_t> keep) {
  std::vector<std::ptrdiff_t> pos;
  ConditionalGaussian out;
  for (std::size_t idx : keep) {
    auto p = joint.position(idx);
    if (p < 0) throw Error("marginal index " + std::to_string(idx) + " not in the joint block");
    pos.push_back(p);
    out.indices.push_back(idx);
  }
  out.mean = detail::gather(joint.mean, pos);
  out.covariance = detail::gather(joint.covariance, pos, pos);
  return out;
}

/// log N(x; mean, cov) of the whole block. `x` is ordered like `block.indices`.
inline double log_density(const ConditionalGaussian& block, const Eigen::VectorXd& x) {
  const auto n = static_cast<double>(block.size());
  if (block.size() == 0) return 0.0;
  const auto llt = detail::factorize(block.covariance);
  const Eigen::VectorXd z = x - block.mean;
  const Eigen::VectorXd w = llt.matrixL().solve(z);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + w.squaredNorm());
}

/// Differential entropy of the whole block: 1/2 log det(2 pi e S).
inline double block_entropy(const ConditionalGaussian& block) {
  const auto n = static_cast<double>(block.size());
  if (block.size() == 0) return 0.0;
  Eigen::MatrixXd cov = block.covariance;
  for (Eigen::Index k = 0; k < cov.rows(); ++k) cov(k, k) = std::max(cov(k, k), kVarianceFloor);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  double logdet = 0.0;
  if (llt.info() == Eigen::Success) {
    logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
      logdet += std::log(std::max(es.eigenvalues()(k), kVarianceFloor));
  }
  return 0.5 * (n * std::log(2.0 * std::numbers::pi * std::numbers::e) + logdet);
}

}  // namespace gsmrl
