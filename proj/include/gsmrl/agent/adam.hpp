#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace gsmrl {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 0.5;  // 0 disables clipping
};

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index n, AdamConfig config) : config_(config), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  /// Descends along `grad`.
  void step(Eigen::VectorXd& params, Eigen::VectorXd grad) {
    if (config_.max_grad_norm > 0.0) {
      const double norm = grad.norm();
      if (norm > config_.max_grad_norm) grad *= config_.max_grad_norm / norm;
    }
    ++t_;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    params.array() -= config_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
  }

  const AdamConfig& config() const noexcept { return config_; }
  const Eigen::VectorXd& first_moment() const noexcept { return m_; }
  const Eigen::VectorXd& second_moment() const noexcept { return v_; }
  std::uint64_t steps() const noexcept { return t_; }

  void restore(Eigen::VectorXd m, Eigen::VectorXd v, std::uint64_t t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  AdamConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::uint64_t t_ = 0;
};

}  // namespace gsmrl
