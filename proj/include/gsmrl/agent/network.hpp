#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "gsmrl/error.hpp"
#include "gsmrl/random.hpp"

namespace gsmrl {

enum class Head : std::size_t { kPolicy = 0, kValue = 1, kPrediction = 2 };
inline constexpr std::size_t kNumHeads = 3;

struct NetworkShape {
  std::size_t inputs = 0;
  std::size_t actions = 0;      // d + 1
  std::size_t predictions = 0;  // K logits or target/feature means
  std::vector<std::size_t> hidden = {64, 64};

  std::size_t outputs(Head h) const {
    switch (h) {
      case Head::kPolicy: return actions;
      case Head::kValue: return 1;
      case Head::kPrediction: return predictions;
    }
    return 0;
  }
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Feed-forward tanh network: the first hidden layer is shared, the remaining hidden layers and
/// the output layer are per head. Parameters live in one flat vector so the optimizer and the
/// checkpoint treat them uniformly.
class Network {
 public:
  struct Layer {
    Eigen::Index in = 0;
    Eigen::Index out = 0;
    Eigen::Index offset = 0;  // weights (out x in, column-major) followed by biases
    Eigen::Index size() const { return out * in + out; }
  };

  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd trunk;  // shared activations; equals input when there is no hidden layer
    std::array<std::vector<Eigen::MatrixXd>, kNumHeads> hidden;
    std::array<Eigen::MatrixXd, kNumHeads> output;
  };

  Network() = default;

  explicit Network(NetworkShape shape) : shape_(std::move(shape)) {
    if (shape_.inputs == 0 || shape_.actions == 0) throw Error("network needs inputs and actions");
    Eigen::Index offset = 0;
    auto add = [&](std::size_t in, std::size_t out) {
      Layer l{static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out), offset};
      offset += l.size();
      return l;
    };
    std::size_t width = shape_.inputs;
    if (!shape_.hidden.empty()) {
      trunk_ = add(width, shape_.hidden[0]);
      has_trunk_ = true;
      width = shape_.hidden[0];
    }
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      std::size_t w = width;
      for (std::size_t k = 1; k < shape_.hidden.size(); ++k) {
        heads_[h].push_back(add(w, shape_.hidden[k]));
        w = shape_.hidden[k];
      }
      const auto outputs = shape_.outputs(static_cast<Head>(h));
      heads_[h].push_back(add(w, outputs));
    }
    params_ = Eigen::VectorXd::Zero(offset);
  }

  const NetworkShape& shape() const noexcept { return shape_; }
  Eigen::Index num_params() const noexcept { return params_.size(); }
  Eigen::VectorXd& params() noexcept { return params_; }
  const Eigen::VectorXd& params() const noexcept { return params_; }

  /// Scaled-normal weights, zero biases; output layers start small so the initial policy and
  /// prediction are close to uniform.
  void initialize(Rng& rng, double output_scale = 0.01) {
    auto fill = [&](const Layer& l, double scale) {
      const double sd = scale / std::sqrt(static_cast<double>(l.in));
      for (Eigen::Index k = 0; k < l.out * l.in; ++k) params_(l.offset + k) = rng.normal() * sd;
      for (Eigen::Index k = 0; k < l.out; ++k) params_(l.offset + l.out * l.in + k) = 0.0;
    };
    if (has_trunk_) fill(trunk_, 1.0);
    for (std::size_t h = 0; h < kNumHeads; ++h)
      for (std::size_t k = 0; k < heads_[h].size(); ++k)
        fill(heads_[h][k], k + 1 == heads_[h].size() ? (h == 1 ? 1.0 : output_scale) : 1.0);
  }

  /// Forward pass over a batch stored column-wise (inputs x batch).
  void forward(const Eigen::MatrixXd& x, Cache& cache) const {
    if (x.rows() != static_cast<Eigen::Index>(shape_.inputs)) throw Error("encoding size does not match network");
    cache.input = x;
    cache.trunk = has_trunk_ ? apply(trunk_, x, true) : x;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      auto& acts = cache.hidden[h];
      acts.clear();
      const Eigen::MatrixXd* cur = &cache.trunk;
      for (std::size_t k = 0; k + 1 < heads_[h].size(); ++k) {
        acts.push_back(apply(heads_[h][k], *cur, true));
        cur = &acts.back();
      }
      cache.output[h] = apply(heads_[h].back(), *cur, false);
    }
  }

  Cache forward(const Eigen::MatrixXd& x) const {
    Cache c;
    forward(x, c);
    return c;
  }

  /// Accumulates d(loss)/d(params) into `grad` from output gradients per head (outputs x batch).
  /// Heads whose gradient matrix is empty are skipped.
  void backward(const Cache& cache, const std::array<Eigen::MatrixXd, kNumHeads>& d_out, Eigen::VectorXd& grad) const {
    if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());
    Eigen::MatrixXd d_trunk = Eigen::MatrixXd::Zero(cache.trunk.rows(), cache.trunk.cols());
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      if (d_out[h].size() == 0) continue;
      const auto& layers = heads_[h];
      Eigen::MatrixXd delta = d_out[h];
      for (std::size_t k = layers.size(); k-- > 0;) {
        const Eigen::MatrixXd& in = k == 0 ? cache.trunk : cache.hidden[h][k - 1];
        accumulate(layers[k], in, delta, grad);
        Eigen::MatrixXd d_in = weights(layers[k]).transpose() * delta;
        if (k == 0) {
          d_trunk += d_in;
        } else {
          delta = d_in.cwiseProduct((1.0 - cache.hidden[h][k - 1].array().square()).matrix());
        }
      }
    }
    if (has_trunk_) {
      const Eigen::MatrixXd delta = d_trunk.cwiseProduct((1.0 - cache.trunk.array().square()).matrix());
      accumulate(trunk_, cache.input, delta, grad);
    }
  }

  /// Parameter index range [begin, end) belonging only to one head.
  std::pair<Eigen::Index, Eigen::Index> head_range(Head h) const {
    const auto& layers = heads_[static_cast<std::size_t>(h)];
    return {layers.front().offset, layers.back().offset + layers.back().size()};
  }

 private:
  Eigen::Map<const Eigen::MatrixXd> weights(const Layer& l) const {
    return {params_.data() + l.offset, l.out, l.in};
  }
  Eigen::Map<const Eigen::VectorXd> biases(const Layer& l) const {
    return {params_.data() + l.offset + l.out * l.in, l.out};
  }

  Eigen::MatrixXd apply(const Layer& l, const Eigen::MatrixXd& x, bool activate) const {
    Eigen::MatrixXd z = weights(l) * x;
    z.colwise() += biases(l);
    if (activate) z = z.array().tanh().matrix();
    return z;
  }

  static void accumulate(const Layer& l, const Eigen::MatrixXd& in, const Eigen::MatrixXd& delta, Eigen::VectorXd& grad) {
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + l.offset, l.out, l.in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + l.offset + l.out * l.in, l.out);
    gw.noalias() += delta * in.transpose();
    gb += delta.rowwise().sum();
  }

  NetworkShape shape_;
  Layer trunk_;
  bool has_trunk_ = false;
  std::array<std::vector<Layer>, kNumHeads> heads_;
  Eigen::VectorXd params_;
};

}  // namespace gsmrl
