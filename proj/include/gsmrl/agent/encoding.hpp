#pragma once

#include <vector>

#include "gsmrl/core.hpp"

namespace gsmrl {

/// Layout of the fixed-length state encoding:
/// per feature [observed, value-or-0, imputed mean, imputed std, utility], then the prediction
/// slots, then the step fraction.
struct EncodingLayout {
  TaskKind task = TaskKind::kClassification;
  std::size_t d = 0;
  std::size_t prediction_slots = 0;  // K for classification, 2 * target dims for regression, 0 for AIR
  bool side_info = true;             // false zeroes every surrogate-derived slot

  static constexpr std::size_t kPerFeature = 5;

  static EncodingLayout for_task(TaskKind task, std::size_t d, std::size_t num_classes, std::size_t target_dim) {
    EncodingLayout l;
    l.task = task;
    l.d = d;
    l.prediction_slots = task == TaskKind::kClassification ? num_classes
                         : task == TaskKind::kRegression   ? 2 * target_dim
                                                           : 0;
    return l;
  }

  std::size_t size() const noexcept { return kPerFeature * d + prediction_slots + 1; }
};

inline std::vector<double> encode(const EncodingLayout& layout, const AcquisitionState& state, const SideInfo& info) {
  std::vector<double> x(layout.size(), 0.0);
  for (const auto& e : state.entries()) {
    x[EncodingLayout::kPerFeature * e.index] = 1.0;
    x[EncodingLayout::kPerFeature * e.index + 1] = e.value;
  }
  if (!layout.side_info) return x;
  for (std::size_t i = 0; i < layout.d; ++i) {
    double* slot = &x[EncodingLayout::kPerFeature * i];
    if (!info.imputed_mean.empty()) slot[2] = info.imputed_mean[i];
    if (!info.imputed_std.empty()) slot[3] = info.imputed_std[i];
    if (!info.utility.empty()) slot[4] = info.utility[i];
  }
  double* pred = x.data() + EncodingLayout::kPerFeature * layout.d;
  if (layout.task == TaskKind::kClassification) {
    for (std::size_t k = 0; k < layout.prediction_slots && k < info.prediction.probabilities.size(); ++k)
      pred[k] = info.prediction.probabilities[k];
  } else if (layout.task == TaskKind::kRegression) {
    const std::size_t m = layout.prediction_slots / 2;
    for (std::size_t j = 0; j < m && j < info.prediction.mean.size(); ++j) {
      pred[j] = info.prediction.mean[j];
      pred[m + j] = info.prediction.stddev.empty() ? 0.0 : info.prediction.stddev[j];
    }
  }
  x.back() = info.step_fraction;
  return x;
}

}  // namespace gsmrl
