#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gsmrl/agent/trainer.hpp"
#include "gsmrl/greedy.hpp"
#include "gsmrl/harness/evaluate.hpp"

namespace gsmrl {

enum class PolicyKind { kGsmrl, kGreedy, kStatic, kRandom, kDirichlet };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kGsmrl: return "gsmrl";
    case PolicyKind::kGreedy: return "greedy";
    case PolicyKind::kStatic: return "static";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kDirichlet: return "dirichlet";
  }
  return "?";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
  for (auto k : {PolicyKind::kGsmrl, PolicyKind::kGreedy, PolicyKind::kStatic, PolicyKind::kRandom, PolicyKind::kDirichlet})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown policy '" + s + "' (expected gsmrl, greedy, static, random or dirichlet)");
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::kGsmrl;
  AgentConfig agent;
  GreedyConfig greedy;
  DirichletAcquirer dirichlet;
};

/// A dataset with its fitted surrogate and environment settings; shared read-only by cells.
struct Problem {
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const Surrogate> surrogate;
  EnvConfig env;
  EvalOptions eval;
  SplitTag split = SplitTag::kTest;
};

struct CellResult {
  MetricReport report;
  std::vector<CurvePoint> curve;  // GSMRL training curve
  std::optional<std::string> error;
};

/// Rows used to build the static order: validation when present, else train.
inline std::vector<const Instance*> static_order_rows(const Dataset& ds) {
  auto rows = ds.view(SplitTag::kVal);
  return rows.empty() ? ds.view(SplitTag::kTrain) : rows;
}

/// Configures (and for GSMRL trains) one policy, then evaluates it on the problem's split.
/// A budget switches the environment and the policy to fixed-budget mode.
inline CellResult run_cell(const Problem& problem, const PolicySpec& spec, std::optional<std::size_t> budget = {}) {
  CellResult out;
  EnvConfig env_cfg = problem.env;
  if (budget) {
    if (*budget == 0 || *budget > problem.data->d) throw ConfigError("budget must lie in [1, d]");
    env_cfg.hard_budget = budget;
  }
  AfaEnvironment env(problem.data, problem.split, env_cfg);
  env.set_imputer(problem.surrogate);
  EvalOptions eval = problem.eval;

  switch (spec.kind) {
    case PolicyKind::kGsmrl: {
      Trainer trainer(problem.data, problem.surrogate, env_cfg, spec.agent);
      trainer.train();
      out.curve = trainer.curve();
      GsmrlAgent agent = trainer.agent();
      agent.mode = ActMode::kGreedy;
      eval.episode.gamma = spec.agent.gamma;
      eval.episode.side_info = spec.agent.side_info_config;
      eval.episode.terminal_source =
          choose_terminal_source(agent, problem.data, *problem.surrogate, env_cfg, spec.agent);
      out.report = evaluate(agent, env, *problem.surrogate, eval);
      break;
    }
    case PolicyKind::kGreedy: {
      GreedyConfig g = spec.greedy;
      if (budget) g.budget = budget;
      GreedyPolicy policy(g);
      out.report = evaluate(policy, env, *problem.surrogate, eval);
      break;
    }
    case PolicyKind::kStatic: {
      Rng rng = Rng(eval.seed).substream(0x57a7);
      auto order = build_static_order(*problem.surrogate, static_order_rows(*problem.data), spec.greedy.utilities, rng);
      StaticPolicy policy(std::move(order), budget);
      out.report = evaluate(policy, env, *problem.surrogate, eval);
      break;
    }
    case PolicyKind::kRandom: {
      RandomPolicy policy(budget);
      out.report = evaluate(policy, env, *problem.surrogate, eval);
      break;
    }
    case PolicyKind::kDirichlet: {
      DirichletPolicy policy(spec.dirichlet, budget, spec.greedy.utilities);
      out.report = evaluate(policy, env, *problem.surrogate, eval);
      break;
    }
  }
  return out;
}

/// As run_cell, but failures are recorded instead of thrown.
inline CellResult run_cell_guarded(const Problem& problem, const PolicySpec& spec, std::optional<std::size_t> budget = {}) {
  try {
    return run_cell(problem, spec, budget);
  } catch (const std::exception& e) {
    CellResult failed;
    failed.report.policy = to_string(spec.kind);
    failed.error = e.what();
    return failed;
  }
}

/// Runs fn(0..n-1) on up to `threads` workers. Each index must write only its own output slot.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < n;) fn(k);
    });
  for (auto& th : pool) th.join();
}

}  // namespace gsmrl
