// Acceptance checks, one per criterion. Usage: gsmrl_acceptance <n>... | all
// Prints "criterion <n>: PASS|FAIL <detail>" per criterion; exit status 1 if any failed.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "gsmrl/agent/checkpoint.hpp"
#include "gsmrl/cli/app.hpp"
#include "gsmrl/greedy.hpp"
#include "gsmrl/harness/ablation.hpp"
#include "gsmrl/harness/micro_mdp.hpp"
#include "gsmrl/surrogate_ops.hpp"
#include "gsmrl/synthetic.hpp"
#include "support/table_oracle.hpp"

namespace gsmrl::acceptance {
namespace {

using test_support::oracle_of;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool verbose() { return std::getenv("GSMRL_ACCEPTANCE_VERBOSE") != nullptr; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

AcquisitionState observe(std::size_t d, std::initializer_list<std::pair<std::size_t, double>> values) {
  AcquisitionState s(d);
  for (auto [i, v] : values) s = apply_acquisition(s, i, v);
  return s;
}

ConditionalGaussian block(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) { return detail::full_block(mean, cov); }

Eigen::MatrixXd random_covariance(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (auto& x : a.reshaped()) x = rng.normal();
  return a * a.transpose() / static_cast<double>(n) + 0.2 * Eigen::MatrixXd::Identity(n, n);
}

// Covariance of coordinates `keep` given coordinates `given`, by Schur complement.
Eigen::MatrixXd schur(const Eigen::MatrixXd& cov, const std::vector<Eigen::Index>& keep, const std::vector<Eigen::Index>& given) {
  Eigen::MatrixXd kk = cov(keep, keep);
  if (given.empty()) return kk;
  const Eigen::MatrixXd kg = cov(keep, given), gg = cov(given, given);
  return kk - kg * gg.ldlt().solve(kg.transpose());
}

// ---- 1: shaping invariance -----------------------------------------------------------------

Outcome shaping_invariance() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::size_t states = 0, agree = 0, mdps = 0, nontrivial = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = trial % 2 ? 4 : 3;
    const std::size_t K = 2 + static_cast<std::size_t>(trial % 3 == 0);
    const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, std::vector<std::size_t>(d, 2), K, rng);
    const auto costs = CostModel::uniform(d, 0.05 + 0.1 * (trial % 4));
    MicroMdpConfig plain, shaped;
    plain.gamma = shaped.gamma = trial % 3 == 2 ? 0.9 : 1.0;
    shaped.shaping = true;
    const auto a = solve_micro_mdp(m, costs, plain), b = solve_micro_mdp(m, costs, shaped);
    ++mdps;
    nontrivial += a.at(AcquisitionState(d)).action != termination_action(d);
    for (const auto* st : a.reachable()) {
      const auto& other = b.at(st->state);
      ++states;
      agree += st->optimal == other.optimal && st->action == other.action;
    }
  }
  const double secs = seconds_since(t0);
  return {agree == states && secs < 60.0,
          std::to_string(mdps) + " micro-MDPs (" + std::to_string(nontrivial) + " acquire at the root), " +
              std::to_string(agree) + "/" + std::to_string(states) + " reachable states agree, " + fmt(secs, 3) + "s"};
}

// ---- 2: utility estimators -----------------------------------------------------------------

Outcome utility_estimators() {
  const auto t0 = Clock::now();
  Rng rng(202);
  std::size_t within = 0;
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    const std::size_t d = 3 + static_cast<std::size_t>(pair % 2);
    std::vector<std::size_t> levels(d);
    for (auto& l : levels) l = 2 + rng.index(2);
    const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, levels, 2 + rng.index(2), rng);
    const auto o = oracle_of(m);
    // Random state: each feature observed with probability 1/2, candidate among the rest.
    AcquisitionState s(d);
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < d; ++i) {
      if (rng.uniform() < 0.5 && i + 1 < d) {
        s = apply_acquisition(s, i, static_cast<double>(rng.index(levels[i])));
      } else {
        open.push_back(i);
      }
    }
    const std::size_t cand = open[rng.index(open.size())];
    const auto est = utility_classification(m, s, cand, 2000, rng);
    const double z = std::abs(est.value - o.cmi(s, cand)) / std::max(est.std_error, 1e-300);
    worst = std::max(worst, z);
    within += z <= 3.0;
  }
  std::string gauss;
  bool gauss_ok = true;
  for (double rho : {0.1, 0.5, 0.9}) {
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, rho, rho, 1.0;
    const JointGaussianSurrogate m(TaskKind::kRegression, 1, block(Eigen::VectorXd::Zero(2), cov), 1e-4);
    const auto est = utility_regression(m, AcquisitionState(1), 0, 4000, rng);
    const double z = std::abs(est.value + 0.5 * std::log(1.0 - rho * rho)) / est.std_error;
    gauss_ok = gauss_ok && z <= 2.0;
    gauss += " rho=" + fmt(rho, 2) + ":" + fmt(z, 3) + "SE";
  }
  const double secs = seconds_since(t0);
  return {within == 100 && gauss_ok && secs < 60.0,
          "discrete " + std::to_string(within) + "/100 within 3 SE (worst " + fmt(worst, 3) + " SE); gaussian" + gauss +
              "; " + fmt(secs, 3) + "s"};
}

// ---- 3: symmetry of the two MI forms -------------------------------------------------------

// Feature form H(x_i | x_o) - E_y H(x_i | y, x_o) for a class-conditional Gaussian model, with the
// mixture entropy estimated by Monte Carlo. Returns {value, standard error}.
std::pair<double, double> feature_form_mc(const ClassConditionalSurrogate& m, const AcquisitionState& s, std::size_t i,
                                          std::size_t samples, Rng& rng) {
  const std::size_t K = m.num_classes();
  std::vector<Eigen::Index> obs;
  std::vector<double> vals;
  for (const auto& e : s.entries()) {
    obs.push_back(static_cast<Eigen::Index>(e.index));
    vals.push_back(e.value);
  }
  std::vector<double> logw(K), mu(K), var(K);
  for (std::size_t y = 0; y < K; ++y) {
    const auto& g = m.class_model(y);
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    double loglik = 0.0;
    double mean = g.mean(ii), v = g.covariance(ii, ii);
    if (!obs.empty()) {
      const Eigen::MatrixXd goo = g.covariance(obs, obs);
      Eigen::VectorXd r(static_cast<Eigen::Index>(obs.size()));
      for (std::size_t k = 0; k < obs.size(); ++k) r(static_cast<Eigen::Index>(k)) = vals[k] - g.mean(obs[k]);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(goo);
      const Eigen::VectorXd cio = g.covariance(std::vector<Eigen::Index>{ii}, obs).transpose();
      mean += cio.dot(ldlt.solve(r));
      v -= cio.dot(ldlt.solve(cio));
      loglik = -0.5 * r.dot(ldlt.solve(r)) - 0.5 * std::log(goo.determinant()) -
               0.5 * static_cast<double>(obs.size()) * std::log(2.0 * std::numbers::pi);
    }
    logw[y] = std::log(m.priors()[y]) + loglik;
    mu[y] = mean;
    var[y] = v;
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(K);
  double tot = 0.0;
  for (std::size_t y = 0; y < K; ++y) tot += w[y] = std::exp(logw[y] - top);
  for (auto& x : w) x /= tot;
  double cond = 0.0;
  for (std::size_t y = 0; y < K; ++y) cond += w[y] * 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * var[y]);
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const std::size_t y = rng.categorical(w);
    const double x = mu[y] + std::sqrt(var[y]) * rng.normal();
    double dens = 0.0;
    for (std::size_t c = 0; c < K; ++c)
      dens += w[c] * std::exp(-0.5 * (x - mu[c]) * (x - mu[c]) / var[c]) / std::sqrt(2.0 * std::numbers::pi * var[c]);
    const double h = -std::log(dens);
    sum += h;
    sq += h * h;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  return {mean - cond, std::sqrt(std::max(0.0, sq / n - mean * mean) / (n - 1.0))};
}

Outcome mi_symmetry() {
  const auto t0 = Clock::now();
  Rng rng(303);
  double worst_discrete = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, {3, 2, 2}, 3, rng);
    const auto s = trial % 2 ? observe(3, {{0, static_cast<double>(rng.index(3))}}) : AcquisitionState(3);
    for (std::size_t i = 1; i < 3; ++i)
      worst_discrete = std::max(worst_discrete, std::abs(m.mutual_information(s, i) - m.mutual_information_feature_form(s, i)));
  }
  // Class-conditional Gaussians: target form (library Monte Carlo) vs feature form (Monte Carlo above).
  std::size_t cls_ok = 0, reg_ok = 0;
  double worst_cls = 0.0, worst_reg = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = 3;
    std::vector<ConditionalGaussian> classes;
    for (int y = 0; y < 2; ++y) {
      Eigen::VectorXd mean(d);
      for (auto& x : mean) x = rng.normal();
      classes.push_back(block(mean, random_covariance(d, rng)));
    }
    const ClassConditionalSurrogate m({0.4, 0.6}, classes, 1e-4);
    const auto s = trial % 2 ? observe(3, {{0, rng.normal()}}) : AcquisitionState(3);
    const std::size_t i = 1 + rng.index(2);
    const auto target_form = utility_classification(m, s, i, 20000, rng);
    const auto [feature_form, se] = feature_form_mc(m, s, i, 20000, rng);
    const double z = std::abs(target_form.value - feature_form) / std::hypot(target_form.std_error, se);
    worst_cls = std::max(worst_cls, z);
    cls_ok += z <= 3.0;
  }
  // Joint Gaussian regression: target form (library Monte Carlo) vs closed-form feature form.
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 4;  // three features and the target
    const Eigen::MatrixXd cov = random_covariance(n, rng);
    const JointGaussianSurrogate m(TaskKind::kRegression, 3, block(Eigen::VectorXd::Zero(n), cov), 1e-4);
    const bool with_obs = trial % 2;
    const auto s = with_obs ? observe(3, {{0, rng.normal()}}) : AcquisitionState(3);
    const Eigen::Index i = 1 + static_cast<Eigen::Index>(rng.index(2));
    std::vector<Eigen::Index> o;
    if (with_obs) o.push_back(0);
    std::vector<Eigen::Index> oy = o;
    oy.push_back(3);
    const double exact = 0.5 * std::log(schur(cov, {i}, o)(0, 0) / schur(cov, {i}, oy)(0, 0));
    const auto est = utility_regression(m, s, static_cast<std::size_t>(i), 4000, rng);
    const double z = std::abs(est.value - exact) / est.std_error;
    worst_reg = std::max(worst_reg, z);
    reg_ok += z <= 3.0;
  }
  const double secs = seconds_since(t0);
  return {worst_discrete <= 1e-12 && cls_ok == 10 && reg_ok == 10,
          "discrete max |diff| " + fmt(worst_discrete, 3) + " (60 pairs); class-conditional " + std::to_string(cls_ok) +
              "/10 within 3 SE (worst " + fmt(worst_cls, 3) + "); regression " + std::to_string(reg_ok) +
              "/10 within 3 SE (worst " + fmt(worst_reg, 3) + "); " + fmt(secs, 3) + "s"};
}

// ---- 4: conditioning -----------------------------------------------------------------------

Outcome conditioning() {
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 5;
    Eigen::VectorXd mean(n);
    for (auto& x : mean) x = rng.normal();
    const auto g = block(mean, random_covariance(n, rng));
    const std::size_t i = rng.index(5);
    std::size_t j = rng.index(5);
    while (j == i) j = rng.index(5);
    const double vi = rng.normal(), vj = rng.normal();
    const std::vector<std::size_t> oi = {i}, oj = {j};
    const std::vector<double> xi = {vi}, xj = {vj};
    const auto seq = condition(condition(g, oi, xi), oj, xj);
    const std::vector<std::size_t> both = {std::min(i, j), std::max(i, j)};
    const std::vector<double> vals = i < j ? std::vector<double>{vi, vj} : std::vector<double>{vj, vi};
    const auto joint = condition(g, both, vals);
    if (seq.indices != joint.indices) return {false, "index sets differ"};
    worst = std::max({worst, (seq.mean - joint.mean).cwiseAbs().maxCoeff(),
                      (seq.covariance - joint.covariance).cwiseAbs().maxCoeff()});
  }
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.5, 0.5, 1.0;
  const std::vector<std::size_t> o = {0};
  const std::vector<double> v = {0.3};
  const double var = condition(block(Eigen::VectorXd::Zero(2), cov), o, v).covariance(0, 0);
  return {worst <= 1e-8 && std::abs(var - 0.75) <= 1e-10,
          "sequential vs joint max |diff| " + fmt(worst, 3) + " over 200 trials; rho=0.5 conditional variance " +
              fmt(var, 17)};
}

// ---- 5: telescoping shaped return ----------------------------------------------------------

class UniformRandomPolicy : public Policy {
 public:
  std::string name() const override { return "random"; }
  Action act(const PolicyContext& ctx, Rng& rng) override {
    std::vector<double> w(ctx.mask.begin(), ctx.mask.end());
    return rng.categorical(w);
  }
};

Outcome telescoping() {
  double worst_cls = 0.0, worst_air = 0.0;
  std::size_t episodes = 0;
  UniformRandomPolicy policy;
  EpisodeOptions opts;
  opts.gamma = 1.0;
  {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::kGaussMixCls;
    spec.d = 8;
    spec.n = 1000;
    spec.seed = 5;
    auto ds = std::make_shared<const Dataset>(make_synthetic(spec).first);
    const auto model = fit_surrogate(*ds);
    EnvConfig cfg;
    cfg.costs = CostModel::uniform(8, 0.1);
    AfaEnvironment env(ds, SplitTag::kTest, cfg);
    Rng rng(505);
    for (std::size_t k = 0; k < env.pool_size(); ++k, ++episodes) {
      env.reset();
      const auto rec = run_episode(env, policy, *model, opts, rng);
      const double sum = std::accumulate(rec.shaped_rewards.begin(), rec.shaped_rewards.end(), 0.0);
      const double expected = categorical_entropy(model->predict(AcquisitionState(8)).probabilities) -
                              categorical_entropy(model->predict(rec.final_state).probabilities);
      worst_cls = std::max(worst_cls, std::abs(sum - expected));
    }
  }
  {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::kCorrelatedAir;
    spec.d = 6;
    spec.n = 1000;
    spec.seed = 6;
    auto ds = std::make_shared<const Dataset>(make_synthetic(spec).first);
    const auto model = fit_surrogate(*ds);
    const auto& g = dynamic_cast<const JointGaussianSurrogate&>(*model);
    EnvConfig cfg;
    cfg.costs = CostModel::uniform(6, 0.1);
    AfaEnvironment env(ds, SplitTag::kTest, cfg);
    Rng rng(506);
    for (std::size_t k = 0; k < env.pool_size(); ++k, ++episodes) {
      env.reset();
      const auto& truth = env.hidden_instance();
      const auto rec = run_episode(env, policy, *model, opts, rng);
      const double sum = std::accumulate(rec.shaped_rewards.begin(), rec.shaped_rewards.end(), 0.0);
      const double end = rec.final_state.num_observed() == 6 ? 0.0 : g.per_dimension_nll(rec.final_state, truth);
      worst_air = std::max(worst_air, std::abs(sum - (g.per_dimension_nll(AcquisitionState(6), truth) - end)));
    }
  }
  return {worst_cls <= 1e-8 && worst_air <= 1e-8, std::to_string(episodes) + " episodes; max |diff| classification " +
                                                      fmt(worst_cls, 3) + ", AIR " + fmt(worst_air, 3)};
}

// ---- 6: gradient check ---------------------------------------------------------------------

RolloutBatch toy_batch(const Network& net, Rng& rng, std::size_t n) {
  RolloutBatch b;
  const auto k = net.shape().actions;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> x(net.shape().inputs);
    for (auto& v : x) v = rng.normal();
    const std::vector<bool> mask(k, true);
    const auto cache = net.forward(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    const auto logp = masked_log_softmax(cache.output[0].data(), mask);
    const Action a = rng.index(k);
    b.encodings.push_back(x);
    b.masks.push_back(mask);
    b.actions.push_back(a);
    // Keep the probability ratio inside the clip band, where the loss is smooth.
    b.log_probs.push_back(logp[a] + 0.05 * rng.normal());
    b.advantages.push_back(rng.normal());
    b.returns.push_back(rng.normal());
    b.targets.push_back({rng.normal()});
  }
  return b;
}

double max_relative_fd_error(const Network& base, const RolloutBatch& b, const PpoConfig& cfg) {
  std::vector<std::size_t> idx(b.size());
  std::iota(idx.begin(), idx.end(), 0);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(base.num_params());
  ppo_loss(base, b, b.advantages, idx, TaskKind::kRegression, cfg, &grad);
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < base.num_params(); ++k) {
    Network plus = base, minus = base;
    plus.params()(k) += h;
    minus.params()(k) -= h;
    const double fd = (ppo_loss(plus, b, b.advantages, idx, TaskKind::kRegression, cfg, nullptr).total -
                       ppo_loss(minus, b, b.advantages, idx, TaskKind::kRegression, cfg, nullptr).total) /
                      (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad(k)), 1e-6});
    worst = std::max(worst, std::abs(fd - grad(k)) / scale);
  }
  return worst;
}

Outcome gradient_check() {
  NetworkShape shape;
  shape.inputs = 1;
  shape.actions = 2;
  shape.predictions = 1;
  shape.hidden = {1};
  Network net(shape);
  Rng rng(606);
  net.initialize(rng, 1.0);
  if (net.num_params() != 10) return {false, "toy network has " + std::to_string(net.num_params()) + " parameters"};
  const auto b = toy_batch(net, rng, 16);
  std::string detail = "10 parameters;";
  bool ok = true;
  const char* names[] = {"policy", "value", "prediction", "combined"};
  for (int head = 0; head < 4; ++head) {
    PpoConfig cfg;
    auto batch = b;
    if (head < 3) {
      cfg.entropy_coef = head == 0 ? 0.01 : 0.0;
      cfg.value_coef = head == 1 ? 0.5 : 0.0;
      cfg.prediction_coef = head == 2 ? 1.0 : 0.0;
      if (head != 0) std::fill(batch.advantages.begin(), batch.advantages.end(), 0.0);
    } else {
      cfg.entropy_coef = 0.01;
    }
    const double err = max_relative_fd_error(net, batch, cfg);
    ok = ok && err < 1e-4;
    detail += std::string(" ") + names[head] + " " + fmt(err, 3);
  }
  return {ok, detail + " (max relative error)"};
}

// ---- 7: learning on micro-MDPs -------------------------------------------------------------

Outcome micro_learning() {
  std::string detail;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto t0 = Clock::now();
    Rng rng = Rng(707).substream(seed);
    auto model = std::make_shared<const DiscreteExactSurrogate>(
        DiscreteExactSurrogate::random(TaskKind::kClassification, {2, 2, 2}, 2, rng));
    // Per-feature cost at half the most informative feature's MI, so the optimum acquires something.
    double top_mi = 0.0;
    for (std::size_t i = 0; i < 3; ++i) top_mi = std::max(top_mi, model->mutual_information(AcquisitionState(3), i));
    const auto costs = CostModel::uniform(3, 0.5 * top_mi * 3.0);
    const auto solution = solve_micro_mdp(*model, costs, {});

    auto data = std::make_shared<const Dataset>(sample_discrete_dataset(*model, 200000, seed));
    EnvConfig env;
    env.costs = costs;
    AgentConfig agent;
    agent.seed = seed;
    agent.gamma = 1.0;
    agent.hidden = {32, 32};
    agent.iterations = 600;
    agent.train_terminal = TerminalSource::kSurrogate;
    agent.side_info_config.class_utility = ClassUtility::kMonteCarlo;
    Trainer trainer(data, model, env, agent);
    trainer.train();
    const double secs = seconds_since(t0);
    const GsmrlAgent trained = trainer.agent();

    // Greedy action of the trained agent at a state, with the side information it was trained on.
    auto agent_action = [&](const AcquisitionState& state) {
      std::vector<bool> mask(4, false), open(3, false);
      for (auto a : candidate_actions(state, ConstraintKind::kNone)) mask[a] = true;
      for (std::size_t i = 0; i < 3; ++i) open[i] = mask[i];
      Rng side = rng.substream(0x51de);
      const auto step = trained.evaluate(state, side_info(*model, state, open, agent.side_info_config, side));
      Action best = termination_action(3);
      for (Action a = 0; a < 4; ++a)
        if (mask[a] && step.logits[a] > step.logits[best]) best = a;
      return best;
    };
    double worst_gap = 0.0;
    auto matches = [&](const std::vector<const MicroState*>& states) {
      std::size_t hit = 0;
      for (const auto* st : states) {
        const Action best = agent_action(st->state);
        const bool match = std::find(st->optimal.begin(), st->optimal.end(), best) != st->optimal.end();
        hit += match;
        if (!match) worst_gap = std::max(worst_gap, st->value - st->q[best]);
        if (verbose()) {
          std::cerr << "  seed " << seed << " state";
          for (int k : MicroSolution::key_of(st->state)) std::cerr << ' ' << k;
          std::cerr << " p=" << fmt(st->probability, 3) << " q:";
          for (double q : st->q) std::cerr << ' ' << fmt(q, 5);
          std::cerr << " agent " << best << (match ? "" : " MISS") << "\n";
        }
      }
      return hit;
    };
    // Exact value of the agent's greedy policy from the empty state, by recursion over the table.
    std::function<double(const AcquisitionState&)> agent_value = [&](const AcquisitionState& state) {
      const Action a = agent_action(state);
      if (a == termination_action(3)) return -categorical_entropy(model->posterior(state));
      const auto px = model->feature_marginal(state, a);
      double v = -costs.alpha() * costs.cost(a);
      for (std::size_t x = 0; x < px.size(); ++x)
        if (px[x] > 0.0) v += px[x] * agent_value(apply_acquisition(state, a, static_cast<double>(x)));
      return v;
    };
    const auto on_path = solution.reachable_under_optimal();
    const auto all = solution.reachable();
    const std::size_t hit = matches(on_path), hit_all = matches(all);
    const double regret = solution.at(AcquisitionState(3)).value - agent_value(AcquisitionState(3));
    const double rate = static_cast<double>(hit) / static_cast<double>(on_path.size());
    ok = ok && rate >= 0.95 && secs < 300.0;
    detail += " seed " + std::to_string(seed) + ": " + std::to_string(hit) + "/" + std::to_string(on_path.size()) +
              " on the optimal path (" + std::to_string(hit_all) + "/" + std::to_string(all.size()) +
              " of all reachable), largest Q-gap at a miss " + fmt(worst_gap, 3) + ", regret " + fmt(regret, 3) + " nats, " +
              fmt(secs, 3) + "s;";
  }
  return {ok, detail};
}

// ---- 8: qualitative orderings --------------------------------------------------------------

struct Band {
  SeedStats a, b;
  bool separated() const { return a.mean - a.std > b.mean + b.std; }  // a strictly above b
};

std::string bands_text(const std::vector<std::pair<std::size_t, Band>>& bands) {
  std::string s;
  for (const auto& [x, band] : bands)
    s += " B" + std::to_string(x) + "=" + fmt(band.a.mean, 3) + "+-" + fmt(band.a.std, 2) + "/" + fmt(band.b.mean, 3) + "+-" +
         fmt(band.b.std, 2) + (band.separated() ? "" : "*");
  return s;
}

std::size_t count_separated(const std::vector<std::pair<std::size_t, Band>>& bands) {
  std::size_t n = 0;
  for (const auto& [x, band] : bands) n += band.separated();
  return n;
}

Problem synthetic_problem(SyntheticKind kind, std::size_t d, std::uint64_t seed, std::size_t classes = 2,
                          std::map<std::string, double> params = {}) {
  SyntheticSpec spec;
  spec.kind = kind;
  spec.d = d;
  spec.num_classes = classes;
  spec.n = 5000;
  spec.seed = seed;
  spec.params = std::move(params);
  Problem p;
  p.data = std::make_shared<const Dataset>(make_synthetic(spec).first);
  p.surrogate = fit_surrogate(*p.data);
  p.env.costs = CostModel::uniform(p.data->d, 0.1);
  p.eval.bootstrap = 0;
  p.eval.seed = seed;
  return p;
}

Outcome orderings() {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds = {0, 1, 2};

  // (a) dynamic vs static greedy on heterogeneous-cls: 3 classes, router + 3 blocks of 3 gives d = 10.
  std::vector<std::pair<std::size_t, Band>> a_bands;
  {
    std::map<std::size_t, std::vector<double>> dyn, stat;
    for (auto seed : seeds) {
      const auto p = synthetic_problem(SyntheticKind::kHeterogeneousCls, 10, seed, 3, {{"block", 3.0}});
      if (p.data->d != 10) throw Error("heterogeneous-cls layout changed");
      for (std::size_t b = 1; b <= p.data->d; ++b) {
        PolicySpec g, s;
        g.kind = PolicyKind::kGreedy;
        s.kind = PolicyKind::kStatic;
        dyn[b].push_back(run_cell(p, g, b).report.accuracy);
        stat[b].push_back(run_cell(p, s, b).report.accuracy);
      }
    }
    for (auto& [b, v] : dyn) a_bands.push_back({b, {seed_stats(v), seed_stats(stat[b])}});
  }
  const double secs_a = seconds_since(t0);

  // (b) GSMRL vs dynamic greedy on xor-cls; (c) iterations to a fixed return threshold, full vs
  // "w/o rm & aux", on the same problems.
  const std::size_t d = 10;
  std::vector<std::pair<std::size_t, Band>> b_bands, c_bands;
  {
    std::map<std::size_t, std::vector<double>> gsmrl_acc, greedy_acc, full_iters, bare_iters;
    for (auto seed : seeds) {
      const auto p = synthetic_problem(SyntheticKind::kXorCls, d, seed);
      for (std::size_t b = 1; b <= d; ++b) {
        PolicySpec greedy;
        greedy.kind = PolicyKind::kGreedy;
        const auto g = run_cell(p, greedy, b);
        PolicySpec full;
        full.agent.seed = seed;
        full.agent.iterations = 100;
        full.agent.hidden = {64, 64};
        PolicySpec bare = full;
        bare.agent.shaping = false;
        bare.agent.side_info = false;
        const auto f = run_cell(p, full, b);
        const auto r = run_cell(p, bare, b);
        gsmrl_acc[b].push_back(f.report.accuracy);
        greedy_acc[b].push_back(g.report.accuracy);
        // Threshold: midway between dynamic greedy and a static order that takes both XOR bits
        // first, both evaluated at this budget; it does not depend on either trained variant.
        std::vector<std::size_t> oracle_order = {d - 2, d - 1};
        for (std::size_t i = 0; i + 2 < d; ++i) oracle_order.push_back(i);
        AfaEnvironment env(p.data, p.split, [&] {
          EnvConfig c = p.env;
          c.hard_budget = b;
          return c;
        }());
        StaticPolicy oracle({oracle_order, {}}, b);
        const double threshold = 0.5 * (g.report.mean_return + evaluate(oracle, env, *p.surrogate, p.eval).mean_return);
        full_iters[b].push_back(-static_cast<double>(iterations_to_reach(f.curve, threshold)));
        bare_iters[b].push_back(-static_cast<double>(iterations_to_reach(r.curve, threshold)));
      }
    }
    for (auto& [b, v] : gsmrl_acc) b_bands.push_back({b, {seed_stats(v), seed_stats(greedy_acc[b])}});
    for (auto& [b, v] : full_iters) c_bands.push_back({b, {seed_stats(v), seed_stats(bare_iters[b])}});
  }
  const double secs = seconds_since(t0);
  const auto na = count_separated(a_bands), nb = count_separated(b_bands), nc = count_separated(c_bands);
  auto enough = [](std::size_t n, std::size_t total) { return 10 * n >= 7 * total; };
  const bool ok = enough(na, a_bands.size()) && enough(nb, b_bands.size()) && enough(nc, c_bands.size()) && secs < 1800.0;
  return {ok, "(a) " + std::to_string(na) + "/" + std::to_string(a_bands.size()) + bands_text(a_bands) + "; (b) " +
                  std::to_string(nb) + "/" + std::to_string(b_bands.size()) + bands_text(b_bands) + "; (c) " +
                  std::to_string(nc) + "/" + std::to_string(c_bands.size()) + " (negated iterations)" + bands_text(c_bands) +
                  "; (a) " + fmt(secs_a, 3) + "s, total " + fmt(secs, 4) + "s"};
}

// ---- 9: normalized reward endpoints --------------------------------------------------------

class ScriptedPolicy : public Policy {
 public:
  ScriptedPolicy(std::size_t count, std::optional<Prediction> forced) : count_(count), forced_(std::move(forced)) {}
  std::string name() const override { return "scripted"; }
  Action act(const PolicyContext& ctx, Rng&) override {
    const auto k = ctx.state.step();
    return k < count_ ? k : termination_action(ctx.state.dim());
  }
  std::optional<Prediction> predict(const PolicyContext&) override { return forced_; }

 private:
  std::size_t count_;
  std::optional<Prediction> forced_;
};

Outcome normalized_endpoints() {
  // End-to-end through the environment and the metric, with the terminal prediction forced to
  // the true or a wrong class, for several d (uniform 1/d costs are inexact in binary for most d).
  std::size_t cases = 0, exact = 0;
  std::string worst;
  for (std::size_t d : {3u, 6u, 7u, 10u, 12u, 49u}) {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::kGaussMixCls;
    spec.d = d;
    spec.n = 60;
    spec.seed = d;
    auto ds = std::make_shared<const Dataset>(make_synthetic(spec).first);
    const auto model = fit_surrogate(*ds);
    EnvConfig cfg;
    cfg.costs = CostModel::uniform(d, 1.0);
    AfaEnvironment env(ds, SplitTag::kTest, cfg);
    EpisodeOptions opts;
    opts.terminal_source = TerminalSource::kPolicy;
    Rng rng(909);
    struct Case {
      std::size_t count;
      bool correct;
      double expected;
    };
    for (const Case c : {Case{0, true, 1.0}, Case{d, false, -1.0}, Case{d, true, 0.0}}) {
      env.reset();
      const auto label = static_cast<std::size_t>(env.hidden_instance().label);
      std::vector<double> p(ds->num_classes, 0.0);
      p[c.correct ? label : (label + 1) % ds->num_classes] = 1.0;
      ScriptedPolicy policy(c.count, Prediction::categorical(p));
      const auto rec = run_episode(env, policy, *model, opts, rng);
      const double r = result_of(rec, TaskKind::kClassification).normalized_reward;
      ++cases;
      if (r == c.expected) {
        ++exact;
      } else {
        worst = "d=" + std::to_string(d) + " expected " + fmt(c.expected) + " got " + fmt(r, 17);
      }
    }
  }
  return {exact == cases, std::to_string(exact) + "/" + std::to_string(cases) +
                              " endpoint cases exact (1, -1, 0 for d in {3,6,7,10,12,49})" +
                              (worst.empty() ? "" : "; " + worst)};
}

// ---- 10: chronological constraint and Dirichlet posterior ----------------------------------

Outcome chronological() {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::kGaussMixCls;
  spec.d = 10;
  spec.n = 500;
  spec.seed = 10;
  auto ds = std::make_shared<const Dataset>(make_synthetic(spec).first);
  const auto model = fit_surrogate(*ds);
  EnvConfig cfg;
  cfg.costs = CostModel::uniform(10, 0.0);
  cfg.constraint = ConstraintKind::kChronological;
  AfaEnvironment env(ds, SplitTag::kTrain, cfg);
  // An untrained agent in sampling mode with a near-flat policy explores every valid action.
  Rng init(1010);
  auto layout = EncodingLayout::for_task(TaskKind::kClassification, 10, ds->num_classes, 0);
  GsmrlAgent agent = GsmrlAgent::create(layout, ds->num_classes, 0, {16}, init);
  agent.mode = ActMode::kSample;
  Rng rng(1011);
  std::size_t actions = 0, violations = 0, acquisitions = 0;
  while (actions < 100000) {
    env.reset();
    const auto rec = run_episode(env, agent, *model, {}, rng);
    std::optional<std::size_t> last;
    for (auto a : rec.actions) {
      ++actions;
      if (a == termination_action(10)) continue;
      ++acquisitions;
      if (last && a <= *last) ++violations;
      last = a;
    }
  }
  // Dirichlet sampler: posterior = prior + counts, exactly, at random chronological states.
  const auto m = DiscreteExactSurrogate::random(TaskKind::kClassification, {2, 2, 2, 2, 2, 2}, 2, rng);
  DirichletAcquirer acq;
  acq.concentration = 0.7;
  acq.samples = 25;
  std::size_t checked = 0, mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    AcquisitionState s(6);
    if (k % 3) s = apply_acquisition(s, rng.index(5), static_cast<double>(rng.index(2)));
    const auto dec = dirichlet_next(acq, m, s, {}, rng);
    for (std::size_t j = 0; j < dec.steps.size(); ++j, ++checked)
      mismatches += dec.prior[j] != acq.concentration * static_cast<double>(6 - dec.steps[j]) ||
                    dec.posterior[j] != dec.prior[j] + dec.counts[j];
  }
  return {violations == 0 && mismatches == 0,
          std::to_string(actions) + " actions (" + std::to_string(acquisitions) + " acquisitions), " +
              std::to_string(violations) + " violations; Dirichlet " + std::to_string(checked) + " concentrations, " +
              std::to_string(mismatches) + " mismatches"};
}

// ---- 11: determinism -----------------------------------------------------------------------

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("gsmrl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> outputs;
  std::ostringstream log, err;
  for (const char* name : {"a", "b"}) {
    const std::string dir = (root / name).string();
    for (const char* command : {"train-agent", "evaluate"}) {
      std::vector<std::string> args = {"gsmrl", command, "-o", dir, "--seed", "7", "--set", "dataset.n=1500",
                                       "--set", "agent.iterations=8"};
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      if (cli::run(static_cast<int>(argv.size()), argv.data(), log, err) != 0) {
        fs::remove_all(root);
        return {false, std::string(command) + " failed: " + err.str()};
      }
    }
  }
  const auto hash = [](const std::string& bytes) {
    std::uint64_t x = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
      x ^= c;
      x *= 0x100000001b3ULL;
    }
    return x;
  };
  const std::string ca = slurp(root / "a/checkpoint.bin"), cb = slurp(root / "b/checkpoint.bin");
  const std::string ra = slurp(root / "a/report.json"), rb = slurp(root / "b/report.json");
  fs::remove_all(root);
  std::ostringstream detail;
  detail << "checkpoint " << std::hex << hash(ca) << " vs " << hash(cb) << ", report.json " << hash(ra) << " vs " << hash(rb);
  return {!ca.empty() && !ra.empty() && ca == cb && ra == rb, detail.str()};
}

const std::map<int, std::function<Outcome()>>& criteria() {
  static const std::map<int, std::function<Outcome()>> c = {
      {1, shaping_invariance}, {2, utility_estimators}, {3, mi_symmetry},  {4, conditioning},
      {5, telescoping},        {6, gradient_check},     {7, micro_learning}, {8, orderings},
      {9, normalized_endpoints}, {10, chronological},   {11, determinism}};
  return c;
}

}  // namespace
}  // namespace gsmrl::acceptance

int main(int argc, char** argv) {
  using namespace gsmrl::acceptance;
  std::vector<int> which;
  for (int k = 1; k < argc; ++k) {
    if (std::string(argv[k]) == "all") {
      for (const auto& [n, fn] : criteria()) which.push_back(n);
    } else {
      which.push_back(std::atoi(argv[k]));
    }
  }
  if (which.empty()) {
    std::cerr << "usage: gsmrl_acceptance <criterion>... | all\n";
    return 2;
  }
  bool all_pass = true;
  for (int n : which) {
    auto it = criteria().find(n);
    if (it == criteria().end()) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    Outcome out;
    try {
      out = it->second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (out.pass ? "PASS" : "FAIL") << " " << out.detail << std::endl;
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
