#pragma once

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "gsmrl/harness/experiment.hpp"

namespace gsmrl {

enum class SweepAxis { kAlpha, kBudget };

inline const char* to_string(SweepAxis a) { return a == SweepAxis::kAlpha ? "alpha" : "budget"; }

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "alpha") return SweepAxis::kAlpha;
  if (s == "budget") return SweepAxis::kBudget;
  throw ConfigError("unknown sweep axis '" + s + "' (expected alpha or budget)");
}

struct SweepPoint {
  double x = 0.0;  // alpha or budget
  CellResult cell;
};

struct SweepResult {
  std::string policy;
  SweepAxis axis = SweepAxis::kAlpha;
  std::vector<SweepPoint> points;  // successful points by mean count, failed points last
};

/// Budgets 1..d.
inline std::vector<double> default_budgets(std::size_t d) {
  std::vector<double> out;
  for (std::size_t b = 1; b <= d; ++b) out.push_back(static_cast<double>(b));
  return out;
}

/// Runs one independently configured (and trained) policy per grid value.
inline SweepResult sweep(const Problem& problem, const PolicySpec& spec, SweepAxis axis, const std::vector<double>& grid,
                         std::size_t threads = 0) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  SweepResult out;
  out.policy = to_string(spec.kind);
  out.axis = axis;
  out.points.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    const double x = grid[k];
    auto& point = out.points[k];
    point.x = x;
    try {
      if (axis == SweepAxis::kAlpha) {
        Problem p = problem;
        p.env.costs = p.env.costs.with_alpha(x);
        point.cell = run_cell_guarded(p, spec);
      } else {
        if (!(x >= 1.0) || x != std::floor(x)) throw ConfigError("budget must be a positive integer");
        point.cell = run_cell_guarded(problem, spec, static_cast<std::size_t>(x));
      }
    } catch (const std::exception& e) {
      point.cell.report.policy = out.policy;
      point.cell.error = e.what();
    }
  });
  std::stable_sort(out.points.begin(), out.points.end(), [](const SweepPoint& a, const SweepPoint& b) {
    if (a.cell.error.has_value() != b.cell.error.has_value()) return !a.cell.error.has_value();
    if (a.cell.error) return a.x < b.x;
    return a.cell.report.mean_count < b.cell.report.mean_count;
  });
  return out;
}

inline nlohmann::json to_json(const SweepResult& s) {
  nlohmann::json j = {{"policy", s.policy}, {"axis", to_string(s.axis)}, {"points", nlohmann::json::array()}};
  for (const auto& p : s.points) {
    nlohmann::json pj = {{"x", p.x}};
    if (p.cell.error) {
      pj["error"] = *p.cell.error;
    } else {
      pj["report"] = to_json(p.cell.report);
    }
    j["points"].push_back(std::move(pj));
  }
  return j;
}

inline constexpr const char* kSweepCsvHeader =
    "policy,axis,x,metric,ci_metric,mean_count,ci_count,mean_cost,normalized_reward,ci_normalized_reward,mean_return,error";

inline void write_sweep_csv(std::ostream& out, const SweepResult& s, bool header = true) {
  if (header) out << kSweepCsvHeader << '\n';
  for (const auto& p : s.points) {
    const auto& r = p.cell.report;
    out << s.policy << ',' << to_string(s.axis) << ',' << p.x << ',';
    if (p.cell.error) {
      out << ",,,,,,,,\"" << *p.cell.error << "\"\n";
      continue;
    }
    out << r.metric() << ',' << r.ci_metric << ',' << r.mean_count << ',' << r.ci_count << ',' << r.mean_cost << ','
        << r.normalized_reward << ',' << r.ci_normalized_reward << ',' << r.mean_return << ",\n";
  }
}

}  // namespace gsmrl
