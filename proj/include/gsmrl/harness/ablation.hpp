#pragma once

#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "gsmrl/harness/experiment.hpp"

namespace gsmrl {

struct AblationVariant {
  std::string name;
  bool shaping = true;
  bool side_info = true;
};

inline const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v = {
      {"full", true, true}, {"w/o rm", false, true}, {"w/o aux", true, false}, {"w/o rm & aux", false, false}};
  return v;
}

inline const AblationVariant& find_variant(const std::string& name) {
  for (const auto& v : ablation_variants())
    if (v.name == name) return v;
  throw ConfigError("unknown ablation variant '" + name + "'");
}

struct AblationConfig {
  PolicySpec base;
  std::vector<std::string> variants = {"full", "w/o rm", "w/o aux", "w/o rm & aux"};
  std::vector<PolicyKind> policies = {PolicyKind::kGsmrl, PolicyKind::kGreedy, PolicyKind::kStatic};
  bool termination = true;
  bool fixed_budget = true;
  std::vector<std::size_t> budgets;  // empty: 1..d
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t threads = 0;
};

/// Variants only apply to the learned policy; greedy baselines run once per mode under "-".
struct AblationCell {
  std::string variant;
  PolicyKind policy = PolicyKind::kGsmrl;
  std::optional<std::size_t> budget;  // empty: termination mode
  std::uint64_t seed = 0;
  CellResult result;
};

struct AblationReport {
  std::vector<AblationCell> cells;
};

/// First iteration whose moving-window return reaches `threshold`; the curve length if never.
inline std::size_t iterations_to_reach(const std::vector<CurvePoint>& curve, double threshold) {
  for (const auto& p : curve)
    if (p.moving_return >= threshold) return p.iteration + 1;
  return curve.size();
}

/// `make_problem(seed)` builds the dataset, surrogate and environment for one seed.
inline AblationReport ablation_suite(const std::function<Problem(std::uint64_t)>& make_problem, const AblationConfig& config) {
  if (config.seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (!config.termination && !config.fixed_budget) throw ConfigError("ablation needs at least one mode");
  AblationReport report;
  for (auto seed : config.seeds) {
    const Problem problem = make_problem(seed);
    std::vector<std::optional<std::size_t>> modes;
    if (config.termination) modes.push_back(std::nullopt);
    if (config.fixed_budget) {
      if (config.budgets.empty()) {
        for (std::size_t b = 1; b <= problem.data->d; ++b) modes.push_back(b);
      } else {
        for (auto b : config.budgets) modes.push_back(b);
      }
    }
    std::vector<AblationCell> cells;
    std::vector<PolicySpec> specs;
    for (auto kind : config.policies) {
      const std::vector<std::string> names = kind == PolicyKind::kGsmrl ? config.variants : std::vector<std::string>{"-"};
      for (const auto& name : names) {
        PolicySpec spec = config.base;
        spec.kind = kind;
        spec.agent.seed = seed;
        if (kind == PolicyKind::kGsmrl) {
          const auto& v = find_variant(name);
          spec.agent.shaping = v.shaping;
          spec.agent.side_info = v.side_info;
        }
        for (const auto& mode : modes) {
          cells.push_back({name, kind, mode, seed, {}});
          specs.push_back(spec);
        }
      }
    }
    parallel_for(cells.size(), config.threads,
                 [&](std::size_t k) { cells[k].result = run_cell_guarded(problem, specs[k], cells[k].budget); });
    for (auto& c : cells) report.cells.push_back(std::move(c));
  }
  return report;
}

/// Seed-aggregated statistics of one (variant, policy, mode) group.
struct AblationRow {
  std::string variant;
  PolicyKind policy = PolicyKind::kGsmrl;
  std::optional<std::size_t> budget;
  SeedStats metric, count, normalized_reward, final_return;
  std::size_t seeds = 0;
  std::size_t errors = 0;
};

inline std::vector<AblationRow> summarize(const AblationReport& report) {
  using Key = std::tuple<int, std::string, std::size_t>;
  std::map<Key, std::vector<const AblationCell*>> groups;
  for (const auto& c : report.cells)
    groups[{static_cast<int>(c.policy), c.variant, c.budget ? *c.budget : 0}].push_back(&c);
  std::vector<AblationRow> rows;
  for (const auto& [key, cells] : groups) {
    AblationRow row;
    row.variant = cells.front()->variant;
    row.policy = cells.front()->policy;
    row.budget = cells.front()->budget;
    std::vector<double> metric, count, nr, ret;
    for (const auto* c : cells) {
      if (c->result.error) {
        ++row.errors;
        continue;
      }
      const auto& r = c->result.report;
      metric.push_back(r.metric());
      count.push_back(r.mean_count);
      nr.push_back(r.normalized_reward);
      ret.push_back(c->result.curve.empty() ? r.mean_return : c->result.curve.back().moving_return);
    }
    row.seeds = metric.size();
    row.metric = seed_stats(metric);
    row.count = seed_stats(count);
    row.normalized_reward = seed_stats(nr);
    row.final_return = seed_stats(ret);
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json to_json(const AblationReport& report) {
  nlohmann::json j = {{"cells", nlohmann::json::array()}, {"table", nlohmann::json::array()}};
  for (const auto& c : report.cells) {
    nlohmann::json cj = {{"variant", c.variant},
                         {"policy", to_string(c.policy)},
                         {"mode", c.budget ? "fixed-budget" : "termination"},
                         {"budget", c.budget ? nlohmann::json(*c.budget) : nlohmann::json()},
                         {"seed", c.seed}};
    if (c.result.error) {
      cj["error"] = *c.result.error;
    } else {
      cj["report"] = to_json(c.result.report);
    }
    j["cells"].push_back(std::move(cj));
  }
  for (const auto& r : summarize(report)) {
    auto stat = [](const SeedStats& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
    j["table"].push_back({{"variant", r.variant},
                          {"policy", to_string(r.policy)},
                          {"budget", r.budget ? nlohmann::json(*r.budget) : nlohmann::json()},
                          {"metric", stat(r.metric)},
                          {"mean_count", stat(r.count)},
                          {"normalized_reward", stat(r.normalized_reward)},
                          {"final_return", stat(r.final_return)},
                          {"seeds", r.seeds},
                          {"errors", r.errors}});
  }
  return j;
}

inline void write_ablation_table_csv(std::ostream& out, const AblationReport& report) {
  out << "variant,policy,mode,budget,metric_mean,metric_std,count_mean,count_std,normalized_reward_mean,"
         "normalized_reward_std,final_return_mean,final_return_std,seeds,errors\n";
  for (const auto& r : summarize(report)) {
    out << '"' << r.variant << "\"," << to_string(r.policy) << ',' << (r.budget ? "fixed-budget" : "termination") << ','
        << (r.budget ? std::to_string(*r.budget) : "") << ',' << r.metric.mean << ',' << r.metric.std << ','
        << r.count.mean << ',' << r.count.std << ',' << r.normalized_reward.mean << ',' << r.normalized_reward.std << ','
        << r.final_return.mean << ',' << r.final_return.std << ',' << r.seeds << ',' << r.errors << '\n';
  }
}

inline constexpr const char* kCurveCsvHeader =
    "iteration,mean_return,raw_return,moving_return,accuracy,mean_count,policy_loss,value_loss,prediction_loss";

inline void write_curve_rows(std::ostream& out, const std::vector<CurvePoint>& curve, const std::string& prefix = "") {
  for (const auto& p : curve)
    out << prefix << p.iteration << ',' << p.mean_return << ',' << p.raw_return << ',' << p.moving_return << ','
        << p.accuracy << ',' << p.mean_count << ',' << p.losses.policy << ',' << p.losses.value << ','
        << p.losses.prediction << '\n';
}

inline void write_ablation_curves_csv(std::ostream& out, const AblationReport& report) {
  out << "variant,mode,budget,seed," << kCurveCsvHeader << '\n';
  for (const auto& c : report.cells) {
    if (c.result.curve.empty()) continue;
    const std::string prefix = '"' + c.variant + "\"," + (c.budget ? "fixed-budget" : "termination") + ',' +
                               (c.budget ? std::to_string(*c.budget) : "") + ',' + std::to_string(c.seed) + ',';
    write_curve_rows(out, c.result.curve, prefix);
  }
}

}  // namespace gsmrl
