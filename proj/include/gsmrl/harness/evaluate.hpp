#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "gsmrl/episode.hpp"

namespace gsmrl {

/// Correctness reward minus the fraction of acquisition cost spent: I(correct) - C(o).
inline double normalized_reward(bool correct, double acquisition_cost) { return (correct ? 1.0 : 0.0) - acquisition_cost; }

/// Support-weighted mean of per-class F1 scores.
inline double weighted_f1(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t num_classes) {
  if (truth.empty()) return 0.0;
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0), fn(num_classes, 0.0), support(num_classes, 0.0);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto y = static_cast<std::size_t>(truth[k]);
    const auto p = static_cast<std::size_t>(predicted[k]);
    support[y] += 1.0;
    if (y == p) {
      tp[y] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[y] += 1.0;
    }
  }
  double f1 = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    if (denom > 0.0) f1 += support[c] * (2.0 * tp[c] / denom);
  }
  return f1 / static_cast<double>(truth.size());
}

/// Half-width of the percentile bootstrap 95% interval of `statistic` over resampled indices.
inline double bootstrap_half_width(std::size_t n, const std::function<double(const std::vector<std::size_t>&)>& statistic,
                                   std::size_t resamples, Rng& rng) {
  if (n < 2 || resamples == 0) return 0.0;
  std::vector<double> stats(resamples);
  std::vector<std::size_t> idx(n);
  for (auto& s : stats) {
    for (auto& i : idx) i = rng.index(n);
    s = statistic(idx);
  }
  std::sort(stats.begin(), stats.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, resamples - 1);
    return stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
  };
  return 0.5 * (at(0.975) - at(0.025));
}

struct InstanceResult {
  std::size_t instance = 0;
  std::size_t count = 0;
  double cost = 0.0;
  double env_return = 0.0;
  bool correct = false;
  int label = -1;
  int predicted = -1;
  double squared_error = 0.0;  // regression: summed over targets; AIR: summed over all features
  double normalized_reward = 0.0;
};

struct MetricReport {
  std::string policy;
  TaskKind task = TaskKind::kClassification;
  std::size_t n = 0;
  std::size_t d = 0;
  double accuracy = 0.0;
  double f1_weighted = 0.0;
  double rmse = 0.0;
  double air_rmse = 0.0;
  double mean_count = 0.0;
  double mean_cost = 0.0;
  double normalized_reward = 0.0;
  double mean_return = 0.0;
  // Bootstrap 95% half-widths.
  double ci_metric = 0.0;
  double ci_count = 0.0;
  double ci_normalized_reward = 0.0;
  std::string terminal_source;
  std::vector<InstanceResult> records;

  /// The task's headline metric: accuracy, RMSE or AIR-RMSE.
  double metric() const {
    return task == TaskKind::kClassification ? accuracy : task == TaskKind::kRegression ? rmse : air_rmse;
  }
};

struct EvalOptions {
  EpisodeOptions episode;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  bool keep_records = true;
  /// Receives every episode, e.g. for JSONL logs.
  std::function<void(const EpisodeRecord&)> on_episode;
};

inline MetricReport summarize(std::string policy, TaskKind task, std::size_t d, std::size_t num_classes,
                              std::vector<InstanceResult> results, std::size_t bootstrap, Rng& rng) {
  MetricReport r;
  r.policy = std::move(policy);
  r.task = task;
  r.d = d;
  r.n = results.size();
  if (results.empty()) return r;
  const double n = static_cast<double>(r.n);
  std::vector<int> truth, pred;
  double se = 0.0;
  for (const auto& x : results) {
    r.accuracy += x.correct ? 1.0 : 0.0;
    r.mean_count += static_cast<double>(x.count);
    r.mean_cost += x.cost;
    r.normalized_reward += x.normalized_reward;
    r.mean_return += x.env_return;
    se += x.squared_error;
    truth.push_back(x.label);
    pred.push_back(x.predicted);
  }
  for (double* m : {&r.accuracy, &r.mean_count, &r.mean_cost, &r.normalized_reward, &r.mean_return}) *m /= n;
  if (task == TaskKind::kClassification) r.f1_weighted = weighted_f1(truth, pred, num_classes);
  if (task == TaskKind::kRegression) r.rmse = std::sqrt(se / n);
  if (task == TaskKind::kAir) r.air_rmse = std::sqrt(se / (n * static_cast<double>(d)));

  auto mean_of = [&](auto field) {
    return [&, field](const std::vector<std::size_t>& idx) {
      double s = 0.0;
      for (auto i : idx) s += field(results[i]);
      return s / static_cast<double>(idx.size());
    };
  };
  std::function<double(const std::vector<std::size_t>&)> metric_stat;
  if (task == TaskKind::kClassification) {
    metric_stat = mean_of([](const InstanceResult& x) { return x.correct ? 1.0 : 0.0; });
  } else {
    const double per = task == TaskKind::kAir ? static_cast<double>(d) : 1.0;
    metric_stat = [&, per](const std::vector<std::size_t>& idx) {
      double s = 0.0;
      for (auto i : idx) s += results[i].squared_error;
      return std::sqrt(s / (static_cast<double>(idx.size()) * per));
    };
  }
  Rng boot = rng.substream(0xb007);
  r.ci_metric = bootstrap_half_width(r.n, metric_stat, bootstrap, boot);
  r.ci_count = bootstrap_half_width(r.n, mean_of([](const InstanceResult& x) { return static_cast<double>(x.count); }),
                                    bootstrap, boot);
  r.ci_normalized_reward =
      bootstrap_half_width(r.n, mean_of([](const InstanceResult& x) { return x.normalized_reward; }), bootstrap, boot);
  r.records = std::move(results);
  return r;
}

inline InstanceResult result_of(const EpisodeRecord& rec, TaskKind task) {
  InstanceResult x;
  x.instance = rec.instance_id;
  x.count = rec.count();
  x.cost = rec.acquisition_cost;
  x.env_return = rec.env_return();
  x.correct = rec.correct;
  x.label = rec.true_label;
  if (task == TaskKind::kClassification) {
    x.predicted = static_cast<int>(rec.prediction.argmax());
  } else {
    for (std::size_t j = 0; j < rec.true_target.size(); ++j) {
      const double e = rec.prediction.mean[j] - rec.true_target[j];
      x.squared_error += e * e;
    }
  }
  x.normalized_reward = normalized_reward(rec.correct, rec.acquisition_cost);
  return x;
}

/// Runs every instance of the environment's split once and aggregates the metrics.
inline MetricReport evaluate(Policy& policy, AfaEnvironment& env, const Surrogate& surrogate, const EvalOptions& options) {
  Rng rng(options.seed);
  std::vector<InstanceResult> results;
  const auto n = env.pool_size();
  for (std::size_t k = 0; k < n; ++k) {
    env.reset();
    Rng ep_rng = rng.substream(k);
    const auto rec = run_episode(env, policy, surrogate, options.episode, ep_rng);
    if (options.on_episode) options.on_episode(rec);
    results.push_back(result_of(rec, env.task()));
  }
  auto report = summarize(policy.name(), env.task(), env.dim(), env.dataset().num_classes, std::move(results),
                          options.bootstrap, rng);
  report.terminal_source = to_string(options.episode.terminal_source);
  if (!options.keep_records) report.records.clear();
  return report;
}

inline nlohmann::json to_json(const MetricReport& r, bool with_records = false) {
  nlohmann::json j = {{"policy", r.policy},
                      {"task", to_string(r.task)},
                      {"n", r.n},
                      {"d", r.d},
                      {"metric", r.metric()},
                      {"ci_metric", r.ci_metric},
                      {"mean_count", r.mean_count},
                      {"ci_count", r.ci_count},
                      {"mean_cost", r.mean_cost},
                      {"normalized_reward", r.normalized_reward},
                      {"ci_normalized_reward", r.ci_normalized_reward},
                      {"mean_return", r.mean_return},
                      {"terminal_source", r.terminal_source}};
  if (r.task == TaskKind::kClassification) {
    j["accuracy"] = r.accuracy;
    j["f1_weighted"] = r.f1_weighted;
  } else if (r.task == TaskKind::kRegression) {
    j["rmse"] = r.rmse;
  } else {
    j["air_rmse"] = r.air_rmse;
  }
  if (with_records) {
    auto& recs = j["records"] = nlohmann::json::array();
    for (const auto& x : r.records)
      recs.push_back({{"instance", x.instance},
                      {"count", x.count},
                      {"cost", x.cost},
                      {"return", x.env_return},
                      {"correct", x.correct},
                      {"normalized_reward", x.normalized_reward}});
  }
  return j;
}

/// Mean and sample standard deviation across seeds.
struct SeedStats {
  double mean = 0.0;
  double std = 0.0;
};

inline SeedStats seed_stats(const std::vector<double>& xs) {
  SeedStats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(v / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace gsmrl
