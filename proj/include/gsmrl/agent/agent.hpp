#pragma once

#include <string>
#include <vector>

#include "gsmrl/agent/encoding.hpp"
#include "gsmrl/agent/ppo.hpp"
#include "gsmrl/episode.hpp"

namespace gsmrl {

/// Outputs of one forward pass for a single state.
struct AgentStep {
  std::vector<double> encoding;
  std::vector<double> logits;
  double value = 0.0;
  Prediction prediction;
};

/// Prediction head output as a Prediction. AIR reconstructions echo the observed values.
inline Prediction head_prediction(TaskKind task, const double* out, std::size_t n, const AcquisitionState& state) {
  if (task == TaskKind::kClassification) return Prediction::categorical(softmax(std::span<const double>(out, n)));
  std::vector<double> mean(out, out + n);
  if (task == TaskKind::kAir)
    for (const auto& e : state.entries()) mean[e.index] = e.value;
  return Prediction::gaussian(std::move(mean), std::vector<double>(n, 0.0));
}

inline std::size_t prediction_outputs(TaskKind task, std::size_t d, std::size_t num_classes, std::size_t target_dim) {
  return task == TaskKind::kClassification ? num_classes : task == TaskKind::kRegression ? target_dim : d;
}

/// The learned acquisition policy with its value and prediction heads.
class GsmrlAgent : public Policy {
 public:
  GsmrlAgent() = default;
  GsmrlAgent(EncodingLayout layout, Network net) : layout_(layout), net_(std::move(net)) {}

  static GsmrlAgent create(EncodingLayout layout, std::size_t num_classes, std::size_t target_dim,
                           std::vector<std::size_t> hidden, Rng& rng) {
    NetworkShape shape;
    shape.inputs = layout.size();
    shape.actions = layout.d + 1;
    shape.predictions = prediction_outputs(layout.task, layout.d, num_classes, target_dim);
    shape.hidden = std::move(hidden);
    Network net(shape);
    net.initialize(rng);
    return GsmrlAgent(layout, std::move(net));
  }

  std::string name() const override { return "gsmrl"; }
  bool wants_side_info() const override { return layout_.side_info; }

  const EncodingLayout& layout() const noexcept { return layout_; }
  Network& network() noexcept { return net_; }
  const Network& network() const noexcept { return net_; }

  ActMode mode = ActMode::kGreedy;

  AgentStep evaluate(const AcquisitionState& state, const SideInfo& info) const {
    AgentStep s;
    s.encoding = encode(layout_, state, info);
    const Eigen::Map<const Eigen::VectorXd> x(s.encoding.data(), static_cast<Eigen::Index>(s.encoding.size()));
    const auto cache = net_.forward(x);
    s.logits.assign(cache.output[0].data(), cache.output[0].data() + cache.output[0].size());
    s.value = cache.output[1](0, 0);
    s.prediction = head_prediction(layout_.task, cache.output[2].data(), static_cast<std::size_t>(cache.output[2].size()), state);
    return s;
  }

  Action act(const PolicyContext& ctx, Rng& rng) override {
    last_ = evaluate(ctx.state, ctx.side_info);
    return act_from_logits(last_.logits.data(), ctx.mask, mode, rng).action;
  }

  std::optional<Prediction> predict(const PolicyContext& ctx) override {
    if (last_.encoding.empty()) last_ = evaluate(ctx.state, ctx.side_info);
    return last_.prediction;
  }

  void begin_episode() override { last_ = {}; }

 private:
  EncodingLayout layout_;
  Network net_;
  AgentStep last_;
};

}  // namespace gsmrl
