#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "gsmrl/class_conditional.hpp"
#include "gsmrl/discrete_exact.hpp"
#include "gsmrl/joint_gaussian.hpp"

namespace gsmrl {

struct SurrogateConfig {
  double ridge = 1e-4;
  SideInfoConfig side_info;
};

/// Fits the task's surrogate family on the train split.
inline std::unique_ptr<Surrogate> fit_surrogate(const Dataset& ds, const SurrogateConfig& config = {}) {
  if (ds.instances.empty()) throw Error("no data");
  if (ds.task == TaskKind::kClassification)
    return std::make_unique<ClassConditionalSurrogate>(fit_class_conditional(ds, SplitTag::kTrain, config.ridge));
  return std::make_unique<JointGaussianSurrogate>(fit_joint_gaussian(ds, SplitTag::kTrain, config.ridge));
}

/// Per-class conditionals p(x_u | y, x_o).
inline std::vector<ConditionalGaussian> condition(const ClassConditionalSurrogate& model, const AcquisitionState& state) {
  return model.view(state).conditionals;
}

/// p(x_u, y | x_o) for regression, p(x_u | x_o) for AIR.
inline ConditionalGaussian condition(const JointGaussianSurrogate& model, const AcquisitionState& state) {
  return model.condition_on(state);
}

inline MonteCarloEstimate utility_classification(const ClassConditionalSurrogate& model, const AcquisitionState& state,
                                                 std::size_t i, std::size_t n_samples, Rng& rng) {
  if (i >= model.num_features() || state.observed(i)) throw Error("feature " + std::to_string(i) + " is not a candidate");
  if (n_samples == 0) throw Error("n_samples must be >= 1");
  return model.mc_utility(model.view(state), i, n_samples, rng);
}

inline MonteCarloEstimate utility_classification(const DiscreteExactSurrogate& model, const AcquisitionState& state,
                                                 std::size_t i, std::size_t n_samples, Rng& rng) {
  if (i >= model.num_features() || state.observed(i)) throw Error("feature " + std::to_string(i) + " is not a candidate");
  if (n_samples == 0) throw Error("n_samples must be >= 1");
  return model.mc_utility(state, i, n_samples, rng);
}

inline double utility_fast(const ClassConditionalSurrogate& model, const AcquisitionState& state, std::size_t i,
                           std::size_t* floored = nullptr) {
  if (i >= model.num_features() || state.observed(i)) throw Error("feature " + std::to_string(i) + " is not a candidate");
  return model.fast_utilities(model.view(state), floored)[i];
}

inline MonteCarloEstimate utility_regression(const JointGaussianSurrogate& model, const AcquisitionState& state,
                                             std::size_t i, std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw Error("n_samples must be >= 1");
  return model.mc_utility(state, i, n_samples, rng);
}

inline double utility_air(const JointGaussianSurrogate& model, const AcquisitionState& state, std::size_t i,
                          bool* floored = nullptr) {
  return model.conditional_entropy(state, i, floored);
}

/// H(y | x_o) - gamma * H(y | x_o, x_i = v) with categorical posteriors.
inline double intermediate_reward_cls(const Surrogate& model, const AcquisitionState& state, std::size_t i, double value,
                                      double gamma) {
  if (model.task() != TaskKind::kClassification) throw Error("classification reward needs a classification surrogate");
  const auto after = apply_acquisition(state, i, value);
  const double before_h = categorical_entropy(model.predict(state).probabilities);
  const double after_h = categorical_entropy(model.predict(after).probabilities);
  return before_h - gamma * after_h;
}

namespace detail {
inline double air_nll(const Surrogate& model, const AcquisitionState& state, const Instance& truth) {
  if (const auto* g = dynamic_cast<const JointGaussianSurrogate*>(&model)) return g->per_dimension_nll(state, truth);
  if (const auto* t = dynamic_cast<const DiscreteExactSurrogate*>(&model)) return t->per_dimension_nll(state, truth);
  throw Error("AIR reward needs a joint Gaussian or discrete surrogate");
}
}  // namespace detail

/// [-log p(x_u | x_o)]/|u| - gamma [-log p(x_{u\i} | x_o, x_i)]/(|u|-1); the second term is 0 when |u| = 1.
inline double intermediate_reward_air(const Surrogate& model, const AcquisitionState& state, std::size_t i, double value,
                                      double gamma, const Instance& truth) {
  if (model.task() != TaskKind::kAir) throw Error("AIR reward needs an AIR surrogate");
  if (state.num_observed() >= state.dim()) throw Error("no unobserved features left");
  const auto after = apply_acquisition(state, i, value);
  const double first = detail::air_nll(model, state, truth);
  const double second = after.num_observed() == after.dim() ? 0.0 : detail::air_nll(model, after, truth);
  return first - gamma * second;
}

/// An optional leading "config-hash <hex>" line ties the file to the run that wrote it.
inline void save_surrogate(const Surrogate& model, const std::string& path, const std::string& config_hash = "") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write surrogate to '" + path + "'");
  if (!config_hash.empty()) out << "config-hash " << config_hash << '\n';
  model.save(out);
}

namespace detail {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw Error("truncated surrogate file");
    return w;
  }
  void expect(const std::string& w) {
    const auto got = word();
    if (got != w) throw Error("malformed surrogate file: expected '" + w + "', got '" + got + "'");
  }
  double number() {
    const auto w = word();
    auto v = detail::parse_number(w);
    if (!v) throw Error("malformed number '" + w + "' in surrogate file");
    return *v;
  }
  std::size_t count() { return static_cast<std::size_t>(number()); }

  Eigen::VectorXd vector(std::size_t n) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = number();
    return v;
  }
  Eigen::MatrixXd matrix(std::size_t n) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = number();
    return m;
  }

 private:
  std::istream& in_;
};

}  // namespace detail

inline std::unique_ptr<Surrogate> load_surrogate(std::istream& in) {
  detail::TokenReader r(in);
  auto head = r.word();
  if (head == "config-hash") {
    r.word();
    head = r.word();
  }
  if (head != "gsmrl-surrogate") throw Error("malformed surrogate file: expected 'gsmrl-surrogate', got '" + head + "'");
  if (r.count() != 1) throw Error("unsupported surrogate file version");
  r.expect("kind");
  const auto kind = r.word();
  if (kind == "class-conditional") {
    r.expect("d");
    const auto d = r.count();
    r.expect("classes");
    const auto K = r.count();
    r.expect("ridge");
    const double ridge = r.number();
    r.expect("priors");
    std::vector<double> priors(K);
    for (auto& p : priors) p = r.number();
    std::vector<ConditionalGaussian> classes;
    for (std::size_t y = 0; y < K; ++y) {
      r.expect("class");
      if (r.count() != y) throw Error("malformed surrogate file: class order");
      r.expect("mean");
      auto mean = r.vector(d);
      r.expect("cov");
      classes.push_back(detail::full_block(std::move(mean), r.matrix(d)));
    }
    return std::make_unique<ClassConditionalSurrogate>(std::move(priors), std::move(classes), ridge);
  }
  if (kind == "joint-gaussian") {
    r.expect("task");
    const auto task = parse_task(r.word());
    r.expect("d");
    const auto d = r.count();
    r.expect("targets");
    const auto m = r.count();
    r.expect("ridge");
    const double ridge = r.number();
    r.expect("mean");
    auto mean = r.vector(d + m);
    r.expect("cov");
    auto cov = r.matrix(d + m);
    return std::make_unique<JointGaussianSurrogate>(task, d, detail::full_block(std::move(mean), std::move(cov)), ridge);
  }
  if (kind == "discrete-exact") {
    r.expect("task");
    const auto task = parse_task(r.word());
    r.expect("d");
    const auto d = r.count();
    r.expect("classes");
    const auto K = r.count();
    r.expect("levels");
    std::vector<std::size_t> levels(d);
    std::size_t cells = K;
    for (auto& l : levels) {
      l = r.count();
      cells *= l;
    }
    r.expect("table");
    std::vector<double> table(cells);
    for (auto& p : table) p = r.number();
    return std::make_unique<DiscreteExactSurrogate>(task, std::move(levels), K, std::move(table));
  }
  throw Error("unknown surrogate kind '" + kind + "'");
}

inline std::unique_ptr<Surrogate> load_surrogate(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open surrogate '" + path + "'");
  return load_surrogate(in);
}

}  // namespace gsmrl
