#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>

#include "gsmrl/agent/checkpoint.hpp"
#include "gsmrl/cli/config.hpp"
#include "gsmrl/harness/micro_mdp.hpp"

namespace gsmrl::cli {

/// The run's output directory; every file written through it carries the config hash.
class Outputs {
 public:
  explicit Outputs(const RunConfig& config) : dir_(config.output_dir), hash_(config.hash) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  const std::string& hash() const noexcept { return hash_; }

  void write_json(const std::string& name, json j) const {
    j["config_hash"] = hash_;
    write_text(name, j.dump(2) + "\n");
  }
  /// CSV files open with a "# config-hash <hex>" comment line.
  void write_csv(const std::string& name, const std::string& body) const {
    write_text(name, "# config-hash " + hash_ + "\n" + body);
  }
  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw Error("cannot write '" + path(name) + "'");
    out << text;
  }

 private:
  std::filesystem::path dir_;
  std::string hash_;
};

inline void write_config(const Outputs& out, const RunConfig& config) { out.write_json("config.json", config.raw); }

struct LoadedData {
  std::shared_ptr<const Dataset> data;
  std::optional<OracleRecord> oracle;
};

inline LoadedData load_data(const RunConfig& config, std::uint64_t seed) {
  LoadedData out;
  if (config.dataset.source == "synthetic") {
    SyntheticSpec spec = config.dataset.synthetic;
    spec.seed = seed;
    auto [ds, oracle] = make_synthetic(spec);
    out.data = std::make_shared<const Dataset>(std::move(ds));
    out.oracle = std::move(oracle);
  } else {
    CsvSchema schema = config.dataset.schema;
    schema.seed = seed;
    out.data = std::make_shared<const Dataset>(load_csv(config.dataset.path, schema));
  }
  return out;
}

/// Loads `surrogate.path` when set, otherwise fits on the train split.
inline std::shared_ptr<const Surrogate> obtain_surrogate(const RunConfig& config, const Dataset& data) {
  std::shared_ptr<const Surrogate> model;
  if (!config.surrogate_path.empty()) {
    model = load_surrogate(config.surrogate_path);
  } else {
    model = fit_surrogate(data, config.surrogate);
  }
  if (model->num_features() != data.d) throw ConfigError("surrogate feature count does not match the dataset");
  if (model->task() != data.task) throw ConfigError("surrogate task does not match the dataset");
  return model;
}

inline EnvConfig env_config(const RunConfig& config, const Dataset& data) {
  EnvConfig env;
  std::vector<double> costs;
  if (config.costs) {
    costs = *config.costs;
  } else if (data.feature_costs) {
    costs = *data.feature_costs;
  }
  if (!config.costs && !data.feature_costs) {
    env.costs = CostModel::uniform(data.d, config.alpha);
  } else {
    if (costs.size() != data.d) throw ConfigError("cost.costs must have one entry per feature");
    env.costs = CostModel(std::move(costs), config.alpha);
  }
  env.constraint = config.constraint;
  if (config.budget && *config.budget > data.d) throw ConfigError("budget exceeds the number of features");
  env.hard_budget = config.budget;
  return env;
}

inline PolicySpec policy_spec(const RunConfig& config, PolicyKind kind) {
  PolicySpec spec;
  spec.kind = kind;
  spec.agent = config.agent;
  spec.greedy = config.greedy;
  spec.dirichlet = config.dirichlet;
  return spec;
}

inline Problem make_problem(const RunConfig& config, std::uint64_t seed) {
  auto loaded = load_data(config, seed);
  Problem p;
  p.data = loaded.data;
  p.surrogate = obtain_surrogate(config, *p.data);
  p.env = env_config(config, *p.data);
  p.env.hard_budget.reset();  // harness cells set their own budget
  p.eval.bootstrap = config.evaluate.bootstrap;
  p.eval.seed = seed;
  p.eval.episode.side_info = config.surrogate.side_info;
  p.split = config.evaluate.split;
  return p;
}

/// Mean conditional log-likelihood of held-out rows: log p(y | x) for supervised tasks,
/// log p(x) / d for AIR.
inline double heldout_loglik(const Surrogate& model, const Dataset& data, SplitTag split) {
  const auto rows = data.view(split);
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (const auto* inst : rows) {
    AcquisitionState s(data.d);
    if (data.task == TaskKind::kAir) {
      total += model.potential(s, *inst);
      continue;
    }
    for (std::size_t i = 0; i < data.d; ++i) s = apply_acquisition(s, i, inst->features[i]);
    const auto pred = model.predict(s);
    if (data.task == TaskKind::kClassification) {
      total += std::log(std::max(pred.probabilities[static_cast<std::size_t>(inst->label)], 1e-300));
    } else {
      for (std::size_t j = 0; j < inst->target.size(); ++j) {
        const double sd = std::max(pred.stddev[j], 1e-12), z = (inst->target[j] - pred.mean[j]) / sd;
        total += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
      }
    }
  }
  return total / static_cast<double>(rows.size());
}

inline double full_feature_accuracy(const Surrogate& model, const Dataset& data, SplitTag split) {
  const auto rows = data.view(split);
  if (rows.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto* inst : rows) {
    AcquisitionState s(data.d);
    for (std::size_t i = 0; i < data.d; ++i) s = apply_acquisition(s, i, inst->features[i]);
    correct += static_cast<int>(model.predict(s).argmax()) == inst->label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

// ---- commands --------------------------------------------------------------------------------

inline void cmd_fit_surrogate(const RunConfig& config, std::ostream& log) {
  const Outputs out(config);
  write_config(out, config);
  const auto loaded = load_data(config, config.seed);
  const auto& data = *loaded.data;
  const auto model = fit_surrogate(data, config.surrogate);
  save_surrogate(*model, out.path("surrogate.bin"), out.hash());
  json report = {{"command", "fit-surrogate"},
                 {"surrogate", model->kind()},
                 {"task", to_string(data.task)},
                 {"d", data.d},
                 {"train_rows", data.indices(SplitTag::kTrain).size()},
                 {"heldout_rows", data.indices(SplitTag::kTest).size()},
                 {"heldout_loglik", heldout_loglik(*model, data, SplitTag::kTest)},
                 {"warnings", data.warnings}};
  if (data.task == TaskKind::kClassification) {
    report["full_feature_accuracy"] = full_feature_accuracy(*model, data, SplitTag::kTest);
    if (loaded.oracle && loaded.oracle->bayes_accuracy) report["bayes_accuracy"] = *loaded.oracle->bayes_accuracy;
  }
  out.write_json("report.json", report);
  log << "fit-surrogate: " << model->kind() << " on " << data.indices(SplitTag::kTrain).size() << " train rows, held-out loglik "
      << report["heldout_loglik"].get<double>() << "\n";
}

inline std::string curves_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << std::setprecision(10) << kCurveCsvHeader << '\n';
  write_curve_rows(os, curve);
  return os.str();
}

inline void cmd_train_agent(const RunConfig& config, std::ostream& log) {
  const Outputs out(config);
  write_config(out, config);
  const auto data = load_data(config, config.seed).data;
  const auto surrogate = obtain_surrogate(config, *data);
  const auto env = env_config(config, *data);
  Trainer trainer(data, surrogate, env, config.agent);
  if (!config.resume.empty()) {
    auto ck = load_checkpoint(config.resume);
    if (ck.seed != config.seed) throw ConfigError("resume checkpoint was trained with a different seed");
    trainer.restore(std::move(ck.params), std::move(ck.adam_m), std::move(ck.adam_v), ck.adam_steps,
                    static_cast<std::size_t>(ck.iteration), std::move(ck.curve));
    log << "resumed at iteration " << trainer.iteration() << "\n";
  }
  const std::size_t every = std::max<std::size_t>(1, config.agent.iterations / 10);
  trainer.train([&](const CurvePoint& p) {
    if ((p.iteration + 1) % every == 0)
      log << "iteration " << p.iteration + 1 << "/" << config.agent.iterations << " return " << p.raw_return << " (moving "
          << p.moving_return << ") count " << p.mean_count << "\n";
    return true;
  });
  const auto source = choose_terminal_source(trainer.agent(), data, *surrogate, env, config.agent);
  const auto ck = make_checkpoint(trainer, json{{"config", result_relevant(config.raw)}, {"config_hash", out.hash()}}, source);
  save_checkpoint(out.path("checkpoint.bin"), ck);
  if (config.surrogate_path.empty()) save_surrogate(*surrogate, out.path("surrogate.bin"), out.hash());
  out.write_csv("curves.csv", curves_csv(trainer.curve()));

  GsmrlAgent agent = trainer.agent();
  agent.mode = ActMode::kGreedy;
  AfaEnvironment eval_env(data, config.evaluate.split, env);
  eval_env.set_imputer(surrogate);
  EvalOptions opts;
  opts.bootstrap = config.evaluate.bootstrap;
  opts.seed = config.seed;
  opts.episode.gamma = config.agent.gamma;
  opts.episode.side_info = config.agent.side_info_config;
  opts.episode.terminal_source = source;
  const auto report = evaluate(agent, eval_env, *surrogate, opts);
  const auto& last = trainer.curve().back();
  out.write_json("report.json", {{"command", "train-agent"},
                                 {"iterations", trainer.iteration()},
                                 {"final_return", last.raw_return},
                                 {"final_moving_return", last.moving_return},
                                 {"terminal_source", to_string(source)},
                                 {"agent", to_json(config.agent)},
                                 {"evaluation", to_json(report)}});
  log << "train-agent: " << trainer.iteration() << " iterations, " << to_string(config.evaluate.split) << " metric "
      << report.metric() << ", mean count " << report.mean_count << "\n";
}

/// Builds the policy named in `evaluate.policy`; GSMRL comes from a checkpoint.
struct PolicyBundle {
  std::unique_ptr<Policy> policy;
  TerminalSource terminal_source = TerminalSource::kSurrogate;
};

inline PolicyBundle make_policy(const RunConfig& config, const Outputs& out, const Dataset& data, const Surrogate& surrogate) {
  PolicyBundle b;
  switch (config.evaluate.policy) {
    case PolicyKind::kGsmrl: {
      const auto path = config.evaluate.checkpoint.empty() ? out.path("checkpoint.bin") : config.evaluate.checkpoint;
      if (!std::filesystem::exists(path)) throw ConfigError("checkpoint '" + path + "' does not exist (run train-agent first)");
      const auto ck = load_checkpoint(path);
      if (ck.layout.d != data.d || ck.layout.task != data.task) throw ConfigError("checkpoint does not match the dataset");
      auto agent = std::make_unique<GsmrlAgent>(agent_from_checkpoint(ck));
      agent->mode = ActMode::kGreedy;
      b.policy = std::move(agent);
      b.terminal_source = config.evaluate.terminal_source.value_or(parse_terminal_source(ck.terminal_source));
      break;
    }
    case PolicyKind::kGreedy: b.policy = std::make_unique<GreedyPolicy>(config.greedy); break;
    case PolicyKind::kStatic: {
      Rng rng = Rng(config.seed).substream(0x57a7);
      b.policy = std::make_unique<StaticPolicy>(
          build_static_order(surrogate, static_order_rows(data), config.surrogate.side_info, rng), config.budget);
      break;
    }
    case PolicyKind::kRandom: b.policy = std::make_unique<RandomPolicy>(config.budget); break;
    case PolicyKind::kDirichlet:
      b.policy = std::make_unique<DirichletPolicy>(config.dirichlet, config.budget, config.surrogate.side_info);
      break;
  }
  if (config.evaluate.policy != PolicyKind::kGsmrl && config.evaluate.terminal_source)
    b.terminal_source = *config.evaluate.terminal_source;
  return b;
}

inline void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  const Outputs out(config);
  write_config(out, config);
  const auto data = load_data(config, config.seed).data;
  const auto surrogate = obtain_surrogate(config, *data);
  const auto env_cfg = env_config(config, *data);
  auto bundle = make_policy(config, out, *data, *surrogate);
  AfaEnvironment env(data, config.evaluate.split, env_cfg);
  env.set_imputer(surrogate);
  EvalOptions opts;
  opts.bootstrap = config.evaluate.bootstrap;
  opts.seed = config.seed;
  opts.episode.gamma = config.agent.gamma;
  opts.episode.side_info = config.surrogate.side_info;
  opts.episode.terminal_source = bundle.terminal_source;
  const auto report = evaluate(*bundle.policy, env, *surrogate, opts);
  auto j = to_json(report, true);
  j["command"] = "evaluate";
  out.write_json("report.json", j);
  std::ostringstream csv;
  csv << std::setprecision(10) << "instance,count,cost,return,correct,label,predicted,squared_error,normalized_reward\n";
  for (const auto& r : report.records)
    csv << r.instance << ',' << r.count << ',' << r.cost << ',' << r.env_return << ',' << (r.correct ? 1 : 0) << ',' << r.label
        << ',' << r.predicted << ',' << r.squared_error << ',' << r.normalized_reward << '\n';
  out.write_csv("records.csv", csv.str());
  log << "evaluate: " << report.policy << " on " << report.n << " " << to_string(config.evaluate.split) << " instances, metric "
      << report.metric() << " +- " << report.ci_metric << ", mean count " << report.mean_count << "\n";
}

inline void cmd_trace(const RunConfig& config, std::ostream& log) {
  const Outputs out(config);
  write_config(out, config);
  const auto data = load_data(config, config.seed).data;
  const auto surrogate = obtain_surrogate(config, *data);
  const auto env_cfg = env_config(config, *data);
  auto bundle = make_policy(config, out, *data, *surrogate);
  AfaEnvironment env(data, config.evaluate.split, env_cfg);
  env.set_imputer(surrogate);
  const auto pool = data->indices(config.evaluate.split);
  if (pool.empty()) throw Error("the " + std::string(to_string(config.evaluate.split)) + " split is empty");
  std::optional<std::size_t> row;
  if (!config.trace_instance) row = pool.front();
  for (auto r : pool)
    if (config.trace_instance && data->instances[r].id == *config.trace_instance) row = r;
  if (!row) throw ConfigError("instance " + std::to_string(*config.trace_instance) + " is not in the " +
                              to_string(config.evaluate.split) + " split");
  env.reset_to(*row);
  EpisodeOptions opts;
  opts.gamma = config.agent.gamma;
  opts.side_info = config.surrogate.side_info;
  opts.terminal_source = bundle.terminal_source;
  opts.record_side_info = true;
  Rng rng = Rng(config.seed).substream(0x7ace, *row);
  const auto rec = run_episode(env, *bundle.policy, *surrogate, opts, rng);

  const auto& truth = data->instances[*row];
  std::ostringstream lines;
  AcquisitionState state(data->d);
  for (std::size_t t = 0; t < rec.actions.size(); ++t) {
    const auto& info = rec.side_infos[t];
    json line = {{"config_hash", out.hash()},
                 {"instance", rec.instance_id},
                 {"step", t},
                 {"observed", state.observed_indices()},
                 {"prediction", to_json(info.prediction)},
                 {"utilities", info.utility},
                 {"imputed_mean", info.imputed_mean},
                 {"imputed_std", info.imputed_std}};
    if (data->task == TaskKind::kClassification) line["entropy"] = categorical_entropy(info.prediction.probabilities);
    if (data->task == TaskKind::kAir) {
      double se = 0.0;
      for (std::size_t i = 0; i < data->d; ++i) se += std::pow(info.imputed_mean[i] - truth.features[i], 2);
      line["imputation_rmse"] = std::sqrt(se / static_cast<double>(data->d));
    }
    const Action a = rec.actions[t];
    if (a == termination_action(data->d)) {
      line["action"] = "terminate";
      line["final_prediction"] = to_json(rec.prediction);
      line["prediction_source"] = rec.prediction_source;
      line["terminal_reward"] = rec.terminal_reward;
      if (rec.true_label >= 0) {
        line["truth"] = rec.true_label;
        line["correct"] = rec.correct;
      }
    } else {
      line["action"] = a;
      line["value"] = rec.acquired_values[t];
      line["cost_reward"] = rec.cost_rewards[t];
      line["shaped_reward"] = rec.shaped_rewards[t];
      state = apply_acquisition(state, a, rec.acquired_values[t]);
    }
    lines << line.dump() << '\n';
  }
  out.write_text("trace.jsonl", lines.str());
  log << "trace: instance " << rec.instance_id << ", " << rec.count() << " acquisitions, return " << rec.env_return() << "\n";
}

inline void cmd_sweep(const RunConfig& config, std::ostream& log) {
  const Outputs out(config);
  write_config(out, config);
  const auto problem = make_problem(config, config.seed);
  const auto result = sweep(problem, policy_spec(config, config.sweep.policy), config.sweep.axis, config.sweep.grid, config.threads);
  auto j = to_json(result);
  j["command"] = "sweep";
  out.write_json("report.json", j);
  std::ostringstream csv;
  csv << std::setprecision(10);
  write_sweep_csv(csv, result);
  out.write_csv("curves.csv", csv.str());
  std::size_t failed = 0;
  for (const auto& p : result.points) failed += p.cell.error ? 1 : 0;
  log << "sweep: " << result.points.size() << " points over " << to_string(result.axis) << ", " << failed << " failed\n";
}

inline void cmd_ablate(const RunConfig& config, std::ostream& log) {
  const Outputs out(config);
  write_config(out, config);
  AblationConfig ab = config.ablate;
  ab.base = policy_spec(config, PolicyKind::kGsmrl);
  const auto report = ablation_suite([&](std::uint64_t seed) { return make_problem(config, seed); }, ab);
  auto j = to_json(report);
  j["command"] = "ablate";
  out.write_json("report.json", j);
  std::ostringstream table, curves;
  table << std::setprecision(10);
  curves << std::setprecision(10);
  write_ablation_table_csv(table, report);
  write_ablation_curves_csv(curves, report);
  out.write_csv("table.csv", table.str());
  out.write_csv("curves.csv", curves.str());
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += c.result.error ? 1 : 0;
  log << "ablate: " << report.cells.size() << " cells, " << failed << " failed\n";
}

inline void cmd_solve_micro(const RunConfig& config, std::ostream& log) {
  const Outputs out(config);
  write_config(out, config);
  const auto& m = config.micro;
  json tables = json::array();
  std::size_t agreeing = 0, checked = 0;
  for (std::size_t k = 0; k < m.count; ++k) {
    Rng rng = Rng(config.seed).substream(0x30c0, k);
    const auto model = DiscreteExactSurrogate::random(TaskKind::kClassification, m.levels, m.classes, rng);
    const auto costs = CostModel::uniform(m.levels.size(), m.alpha);
    MicroMdpConfig plain;
    plain.gamma = m.gamma;
    plain.state_cap = m.state_cap;
    MicroMdpConfig shaped = plain;
    shaped.shaping = true;
    const auto a = solve_micro_mdp(model, costs, plain), b = solve_micro_mdp(model, costs, shaped);
    json states = json::array();
    std::size_t same = 0;
    const auto reachable = a.reachable();
    for (const auto* s : reachable) {
      const auto& t = b.at(s->state);
      same += s->optimal == t.optimal ? 1 : 0;
      states.push_back({{"state", MicroSolution::key_of(s->state)},
                        {"probability", s->probability},
                        {"action", s->action},
                        {"optimal", s->optimal},
                        {"value", s->value},
                        {"shaped_optimal", t.optimal}});
    }
    agreeing += same;
    checked += reachable.size();
    tables.push_back({{"table", k},
                      {"reachable_states", reachable.size()},
                      {"agreement", reachable.empty() ? 1.0 : static_cast<double>(same) / static_cast<double>(reachable.size())},
                      {"root_value", a.at(AcquisitionState(m.levels.size())).value},
                      {"policy", states}});
  }
  const double agreement = checked == 0 ? 1.0 : static_cast<double>(agreeing) / static_cast<double>(checked);
  out.write_json("report.json", {{"command", "solve-micro"}, {"agreement", agreement}, {"tables", tables}});
  log << "solve-micro: " << m.count << " tables, shaped/unshaped optimal actions agree at " << agreeing << "/" << checked
      << " reachable states\n";
}

}  // namespace gsmrl::cli
