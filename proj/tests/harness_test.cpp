#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "gsmrl/greedy.hpp"
#include "gsmrl/harness/ablation.hpp"
#include "gsmrl/harness/evaluate.hpp"
#include "gsmrl/harness/micro_mdp.hpp"
#include "gsmrl/harness/sweep.hpp"
#include "gsmrl/surrogate_ops.hpp"
#include "gsmrl/synthetic.hpp"
#include "support/table_oracle.hpp"

namespace gsmrl {
namespace {

using test_support::oracle_of;
using test_support::TableOracle;

TEST(Metrics, NormalizedRewardEndpoints) {
  EXPECT_EQ(normalized_reward(true, 0.0), 1.0);
  EXPECT_EQ(normalized_reward(false, 1.0), -1.0);
  EXPECT_EQ(normalized_reward(true, 1.0), 0.0);
  EXPECT_EQ(normalized_reward(false, 0.0), 0.0);
}

TEST(Metrics, WeightedF1HandWorked) {
  // Class 0: tp 2, fp 1, fn 1 -> F1 2/3, support 3. Class 1: tp 1, fp 1, fn 1 -> F1 1/2, support 2.
  const std::vector<int> truth = {0, 0, 0, 1, 1};
  const std::vector<int> pred = {0, 0, 1, 1, 0};
  EXPECT_NEAR(weighted_f1(truth, pred, 2), (3.0 * (2.0 / 3.0) + 2.0 * 0.5) / 5.0, 1e-12);
  EXPECT_NEAR(weighted_f1(truth, truth, 2), 1.0, 1e-12);
}

TEST(Metrics, BootstrapShrinksWithSampleSize) {
  Rng data(3);
  auto half_width = [&](std::size_t n) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = data.normal();
    Rng rng(4);
    return bootstrap_half_width(
        n,
        [&](const std::vector<std::size_t>& idx) {
          double s = 0.0;
          for (auto i : idx) s += xs[i];
          return s / static_cast<double>(idx.size());
        },
        1000, rng);
  };
  const double small = half_width(100), large = half_width(1600);
  // Standard-normal mean: 1.96 / sqrt(n).
  EXPECT_NEAR(small, 1.96 / 10.0, 0.04);
  EXPECT_NEAR(small / large, 4.0, 1.0);
}

TEST(Metrics, SeedStatsUseSampleStd) {
  const auto s = seed_stats({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
}

std::shared_ptr<const Dataset> gauss_mix(std::size_t d, std::size_t n) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::kGaussMixCls;
  spec.d = d;
  spec.n = n;
  spec.seed = 5;
  return std::make_shared<const Dataset>(make_synthetic(spec).first);
}

TEST(Evaluate, DeterministicAndCoversSplit) {
  const auto ds = gauss_mix(5, 300);
  const auto model = fit_surrogate(*ds);
  EnvConfig env_cfg;
  env_cfg.costs = CostModel::uniform(5, 0.05);
  auto run = [&] {
    AfaEnvironment env(ds, SplitTag::kTest, env_cfg);
    env.set_imputer(std::shared_ptr<const Surrogate>(fit_surrogate(*ds)));
    GreedyPolicy greedy({});
    EvalOptions opts;
    opts.seed = 9;
    return evaluate(greedy, env, *model, opts);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.n, ds->indices(SplitTag::kTest).size());
  EXPECT_EQ(to_json(a, true).dump(), to_json(b, true).dump());
  EXPECT_GT(a.accuracy, 0.5);
  EXPECT_GT(a.ci_metric, 0.0);
}

TEST(Evaluate, FixedBudgetAcquiresExactly) {
  const auto ds = gauss_mix(4, 200);
  const auto model = fit_surrogate(*ds);
  for (std::size_t budget : {std::size_t{1}, std::size_t{4}}) {
    EnvConfig env_cfg;
    env_cfg.costs = CostModel::uniform(4, 0.0);
    env_cfg.hard_budget = budget;
    AfaEnvironment env(ds, SplitTag::kTest, env_cfg);
    GreedyConfig g;
    g.budget = budget;
    GreedyPolicy greedy(g);
    const auto r = evaluate(greedy, env, *model, {});
    for (const auto& x : r.records) EXPECT_EQ(x.count, budget);
    EXPECT_DOUBLE_EQ(r.mean_count, static_cast<double>(budget));
    if (budget == 4) {
      EXPECT_NEAR(r.mean_cost, 1.0, 1e-12);
    }
  }
}

// ---- micro-MDP --------------------------------------------------------------------------

// Expectimax written against the brute-force table, without shaping.
double oracle_value(const TableOracle& o, const CostModel& costs, double gamma, const AcquisitionState& s) {
  const auto post = o.posterior(s);
  double h = 0.0;
  for (double p : post)
    if (p > 0) h -= p * std::log(p);
  double best = -h;
  for (std::size_t i = 0; i < o.levels.size(); ++i) {
    if (s.observed(i)) continue;
    std::vector<double> px(o.levels[i], 0.0);
    double tot = 0.0;
    for (std::size_t code = 0; code < o.configurations(); ++code) {
      const auto x = o.decode(code);
      if (!o.matches(x, s)) continue;
      for (std::size_t y = 0; y < o.K; ++y) {
        px[x[i]] += o.table[y * o.configurations() + code];
        tot += o.table[y * o.configurations() + code];
      }
    }
    double q = -costs.alpha() * costs.cost(i);
    for (std::size_t v = 0; v < px.size(); ++v)
      if (px[v] > 0) q += px[v] / tot * gamma * oracle_value(o, costs, gamma, apply_acquisition(s, i, double(v)));
    best = std::max(best, q);
  }
  return best;
}

TEST(MicroMdp, ValuesMatchBruteForceExpectimax) {
  Rng rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, {2, 3, 2}, 2, rng);
    const auto o = oracle_of(m);
    const auto costs = CostModel::uniform(3, 0.02 + 0.1 * trial);
    MicroMdpConfig cfg;
    cfg.gamma = trial % 2 ? 0.9 : 1.0;
    const auto sol = solve_micro_mdp(m, costs, cfg);
    for (const auto* st : sol.reachable())
      EXPECT_NEAR(st->value, oracle_value(o, costs, cfg.gamma, st->state), 1e-10);
  }
}

TEST(MicroMdp, ShapingPreservesOptimalActions) {
  Rng rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, {2, 2, 3}, 3, rng);
    const auto costs = CostModel::uniform(3, 0.05 * trial);
    MicroMdpConfig plain, shaped;
    plain.gamma = shaped.gamma = 0.95;
    shaped.shaping = true;
    const auto a = solve_micro_mdp(m, costs, plain), b = solve_micro_mdp(m, costs, shaped);
    for (const auto* st : a.reachable()) EXPECT_EQ(st->optimal, b.at(st->state).optimal);
  }
}

TEST(MicroMdp, ProhibitiveCostTerminatesEverywhere) {
  Rng rng(23);
  const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, {2, 2, 2}, 2, rng);
  const auto sol = solve_micro_mdp(m, CostModel::uniform(3, 1e6), {});
  for (const auto* st : sol.reachable()) EXPECT_EQ(st->action, termination_action(3));
}

TEST(MicroMdp, FreeInformativeFeatureIsAcquiredThenStop) {
  // x0 copies the label, x1 is noise; acquisition is free.
  std::vector<double> table(2 * 4, 0.0);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x1 = 0; x1 < 2; ++x1) table[y * 4 + y + 2 * x1] = 0.25;
  const DiscreteExactSurrogate m(TaskKind::kClassification, {2, 2}, 2, table);
  const auto sol = solve_micro_mdp(m, CostModel::uniform(2, 0.0), {});
  const AcquisitionState empty(2);
  EXPECT_EQ(sol.at(empty).action, 0u);
  for (double v : {0.0, 1.0}) EXPECT_EQ(sol.at(apply_acquisition(empty, 0, v)).action, termination_action(2));
  EXPECT_NEAR(sol.at(empty).value, 0.0, 1e-12);
  EXPECT_EQ(sol.reachable_under_optimal().size(), 3u);
}

TEST(MicroMdp, StateCapIsEnforced) {
  Rng rng(24);
  const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, {2, 2, 2, 2}, 2, rng);
  MicroMdpConfig cfg;
  cfg.state_cap = 10;
  EXPECT_THROW(solve_micro_mdp(m, CostModel::uniform(4, 0.1), cfg), Error);
}

TEST(MicroMdp, SampledDatasetKeepsLevels) {
  Rng rng(25);
  const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, {2, 3}, 2, rng);
  const auto ds = sample_discrete_dataset(m, 100, 3);
  EXPECT_EQ(ds.instances.size(), 100u);
  for (const auto& inst : ds.instances) {
    EXPECT_LT(inst.features[1], 3.0);
    EXPECT_EQ(inst.features[1], std::round(inst.features[1]));
  }
}

// ---- sweep and ablation -------------------------------------------------------------------

Problem small_problem(std::size_t d, double alpha, std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::kGaussMixCls;
  spec.d = d;
  spec.n = 400;
  spec.seed = seed;
  Problem p;
  p.data = std::make_shared<const Dataset>(make_synthetic(spec).first);
  p.surrogate = fit_surrogate(*p.data);
  p.env.costs = CostModel::uniform(d, alpha);
  p.eval.bootstrap = 100;
  return p;
}

PolicySpec quick_gsmrl(std::size_t iterations) {
  PolicySpec spec;
  spec.agent.iterations = iterations;
  spec.agent.episodes_per_iteration = 64;
  spec.agent.hidden = {32, 32};
  spec.agent.ppo.adam.learning_rate = 1e-3;
  return spec;
}

TEST(Sweep, EmptyGridIsAnError) {
  const auto p = small_problem(3, 0.1);
  EXPECT_THROW(sweep(p, {}, SweepAxis::kAlpha, {}), ConfigError);
}

TEST(Sweep, BudgetPointsSortedAndFullBudgetAcquiresAll) {
  const auto p = small_problem(4, 0.0);
  PolicySpec spec;
  spec.kind = PolicyKind::kGreedy;
  const auto s = sweep(p, spec, SweepAxis::kBudget, {4, 2, 1, 3});
  ASSERT_EQ(s.points.size(), 4u);
  for (std::size_t k = 1; k < s.points.size(); ++k)
    EXPECT_LE(s.points[k - 1].cell.report.mean_count, s.points[k].cell.report.mean_count);
  const auto& full = s.points.back();
  EXPECT_EQ(full.x, 4.0);
  for (const auto& r : full.cell.report.records) EXPECT_EQ(r.count, 4u);
}

TEST(Sweep, FailedPointIsRecordedAndSweepContinues) {
  const auto p = small_problem(3, 0.0);
  PolicySpec spec;
  spec.kind = PolicyKind::kStatic;
  const auto s = sweep(p, spec, SweepAxis::kBudget, {7, 2, 1.5});
  ASSERT_EQ(s.points.size(), 3u);
  EXPECT_FALSE(s.points[0].cell.error.has_value());
  EXPECT_EQ(s.points[0].x, 2.0);
  EXPECT_TRUE(s.points[1].cell.error.has_value());
  EXPECT_TRUE(s.points[2].cell.error.has_value());
  EXPECT_TRUE(to_json(s)["points"][1].contains("error"));
}

TEST(Sweep, LargerAlphaAcquiresLess) {
  const auto p = small_problem(4, 0.0);
  const auto s = sweep(p, quick_gsmrl(40), SweepAxis::kAlpha, {0.0, 3.0});
  ASSERT_FALSE(s.points[0].cell.error);
  ASSERT_FALSE(s.points[1].cell.error);
  // Sorted by count: the cheap end has the expensive alpha.
  EXPECT_EQ(s.points[0].x, 3.0);
  EXPECT_LT(s.points[0].cell.report.mean_count, s.points[1].cell.report.mean_count);
}

TEST(Ablation, GridShapeAndSummaries) {
  AblationConfig cfg;
  cfg.base = quick_gsmrl(3);
  cfg.budgets = {1, 2};
  cfg.seeds = {0, 1};
  const auto report = ablation_suite([](std::uint64_t seed) { return small_problem(3, 0.05, seed); }, cfg);
  // Per seed: 4 variants x 3 modes of GSMRL, plus 3 modes for each greedy baseline.
  EXPECT_EQ(report.cells.size(), 2u * (4 * 3 + 3 + 3));
  for (const auto& c : report.cells) {
    EXPECT_FALSE(c.result.error.has_value()) << *c.result.error;
    if (c.budget) {
      EXPECT_DOUBLE_EQ(c.result.report.mean_count, static_cast<double>(*c.budget));
    }
    EXPECT_EQ(c.result.curve.size(), c.policy == PolicyKind::kGsmrl ? 3u : 0u);
  }
  const auto rows = summarize(report);
  EXPECT_EQ(rows.size(), 4u * 3 + 3 + 3);
  for (const auto& r : rows) EXPECT_EQ(r.seeds, 2u);
  std::ostringstream table, curves;
  write_ablation_table_csv(table, report);
  write_ablation_curves_csv(curves, report);
  const auto lines = [](const std::ostringstream& os) {
    const auto s = os.str();
    return std::count(s.begin(), s.end(), '\n');
  };
  EXPECT_EQ(lines(table), 1 + 18);
  EXPECT_EQ(lines(curves), 1 + 2 * 12 * 3);
}

TEST(Ablation, IterationsToReach) {
  std::vector<CurvePoint> curve(5);
  for (std::size_t k = 0; k < 5; ++k) {
    curve[k].iteration = k;
    curve[k].moving_return = -1.0 + 0.25 * static_cast<double>(k);
  }
  EXPECT_EQ(iterations_to_reach(curve, -0.5), 3u);
  EXPECT_EQ(iterations_to_reach(curve, 5.0), 5u);
}

}  // namespace
}  // namespace gsmrl
