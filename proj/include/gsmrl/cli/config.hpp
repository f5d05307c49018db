#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gsmrl/harness/ablation.hpp"
#include "gsmrl/harness/sweep.hpp"
#include "gsmrl/surrogate_ops.hpp"
#include "gsmrl/synthetic.hpp"

namespace gsmrl::cli {

using nlohmann::json;

/// Every accepted key with its default. Keys absent here are rejected; a null default accepts
/// any value of the documented type.
inline json default_config() {
  return json::parse(R"({
    "task": "classification",
    "seed": 0,
    "output_dir": "gsmrl-out",
    "threads": 0,
    "dataset": {
      "source": "synthetic",
      "generator": "gauss-mix-cls",
      "d": 8,
      "n": 5000,
      "classes": 2,
      "params": {},
      "path": "",
      "schema": {}
    },
    "surrogate": {"path": "", "ridge": 1e-4, "mc_samples": 64, "class_utility": "fast"},
    "agent": {
      "hidden": [64, 64],
      "gamma": 0.99,
      "lambda": 0.95,
      "clip": 0.2,
      "epochs": 4,
      "minibatch": 256,
      "value_coef": 0.5,
      "prediction_coef": 1.0,
      "entropy_coef": 0.0,
      "learning_rate": 3e-4,
      "max_grad_norm": 0.5,
      "iterations": 100,
      "episodes_per_iteration": 128,
      "terminal_shaping": true,
      "train_terminal": "best",
      "curve_window": 10,
      "resume": ""
    },
    "cost": {"alpha": 0.1, "costs": null},
    "constraint": "none",
    "budget": null,
    "ablation": {"no_rm": false, "no_aux": false},
    "greedy": {"threshold": 1e-3, "threshold_for_air": false},
    "dirichlet": {"concentration": 1.0, "samples": 10, "horizon": 0},
    "evaluate": {"policy": "gsmrl", "split": "test", "bootstrap": 1000, "checkpoint": "", "terminal_source": "auto"},
    "trace": {"instance": null},
    "sweep": {"policy": "gsmrl", "axis": "alpha", "grid": [0.0, 0.05, 0.1, 0.2, 0.5]},
    "ablate": {
      "variants": ["full", "w/o rm", "w/o aux", "w/o rm & aux"],
      "policies": ["gsmrl", "greedy", "static"],
      "termination": true,
      "fixed_budget": true,
      "budgets": [],
      "seeds": [0, 1, 2]
    },
    "micro": {"levels": [2, 2, 2], "classes": 2, "count": 5, "gamma": 1.0, "alpha": 0.1, "state_cap": 1048576}
  })");
}

namespace detail {

inline bool free_form(const std::string& path) { return path == "dataset.params" || path == "dataset.schema"; }

inline void merge_checked(json& base, const json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw ConfigError("config section '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && !free_form(key)) {
      merge_checked(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

}  // namespace detail

/// Applies `overlay` on top of `base`, rejecting keys the schema does not know.
inline void merge_config(json& base, const json& overlay) { detail::merge_checked(base, overlay, ""); }

/// "a.b.c=value"; the value is parsed as JSON and falls back to a plain string.
inline void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json overlay = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) overlay = json{{*it, overlay}};
  merge_config(config, overlay);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  return j;
}

/// The config without keys that cannot affect results (where outputs go, how many threads).
inline json result_relevant(json config) {
  config.erase("output_dir");
  config.erase("threads");
  return config;
}

/// 64-bit FNV-1a of the canonical dump of the result-relevant keys.
inline std::string config_hash(const json& config) {
  const json h = result_relevant(config);
  std::uint64_t x = 0xcbf29ce484222325ULL;
  for (unsigned char c : h.dump()) {
    x ^= c;
    x *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

struct DatasetSection {
  std::string source;
  SyntheticSpec synthetic;
  std::string path;
  CsvSchema schema;
};

struct EvaluateSection {
  PolicyKind policy = PolicyKind::kGsmrl;
  SplitTag split = SplitTag::kTest;
  std::size_t bootstrap = 1000;
  std::string checkpoint;
  std::optional<TerminalSource> terminal_source;  // empty: as chosen at training time
};

struct SweepSection {
  PolicyKind policy = PolicyKind::kGsmrl;
  SweepAxis axis = SweepAxis::kAlpha;
  std::vector<double> grid;
};

struct MicroSection {
  std::vector<std::size_t> levels;
  std::size_t classes = 2;
  std::size_t count = 5;
  double gamma = 1.0;
  double alpha = 0.1;
  std::size_t state_cap = 1u << 20;
};

struct RunConfig {
  json raw;
  std::string hash;
  TaskKind task = TaskKind::kClassification;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::size_t threads = 0;
  DatasetSection dataset;
  SurrogateConfig surrogate;
  std::string surrogate_path;
  AgentConfig agent;
  std::string resume;
  double alpha = 0.1;
  std::optional<std::vector<double>> costs;
  ConstraintKind constraint = ConstraintKind::kNone;
  std::optional<std::size_t> budget;
  GreedyConfig greedy;
  DirichletAcquirer dirichlet;
  EvaluateSection evaluate;
  std::optional<std::size_t> trace_instance;  // empty: first instance of the split
  SweepSection sweep;
  AblationConfig ablate;
  MicroSection micro;
};

namespace detail {

template <class T>
T get(const json& j, const std::string& section, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + (section.empty() ? std::string(key) : section + "." + key) + "' has the wrong type");
  }
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail

/// Typed view of a merged config; all range checks happen here, before any work.
inline RunConfig parse_run_config(const json& merged) {
  using detail::get;
  using detail::require;
  RunConfig c;
  c.raw = merged;
  c.hash = config_hash(merged);
  c.task = parse_task(get<std::string>(merged, "", "task"));
  c.seed = get<std::uint64_t>(merged, "", "seed");
  c.output_dir = get<std::string>(merged, "", "output_dir");
  require(!c.output_dir.empty(), "output_dir must not be empty");
  c.threads = get<std::size_t>(merged, "", "threads");

  const auto& ds = merged.at("dataset");
  c.dataset.source = get<std::string>(ds, "dataset", "source");
  if (c.dataset.source == "synthetic") {
    auto& s = c.dataset.synthetic;
    s.kind = parse_synthetic_kind(get<std::string>(ds, "dataset", "generator"));
    s.d = get<std::size_t>(ds, "dataset", "d");
    s.n = get<std::size_t>(ds, "dataset", "n");
    s.num_classes = get<std::size_t>(ds, "dataset", "classes");
    s.seed = c.seed;
    s.params = get<std::map<std::string, double>>(ds, "dataset", "params");
    require(s.n > 0, "dataset.n must be positive");
    const TaskKind generated = s.kind == SyntheticKind::kLinearReg       ? TaskKind::kRegression
                               : s.kind == SyntheticKind::kCorrelatedAir ? TaskKind::kAir
                                                                         : TaskKind::kClassification;
    require(generated == c.task, std::string("generator ") + to_string(s.kind) + " does not produce task " + to_string(c.task));
  } else if (c.dataset.source == "csv") {
    c.dataset.path = get<std::string>(ds, "dataset", "path");
    require(!c.dataset.path.empty(), "dataset.path is required for csv datasets");
    require(std::filesystem::exists(c.dataset.path), "dataset file '" + c.dataset.path + "' does not exist");
    json schema = ds.at("schema");
    if (!schema.contains("task")) schema["task"] = to_string(c.task);
    if (!schema.contains("seed")) schema["seed"] = c.seed;
    c.dataset.schema = CsvSchema::from_json(schema);
    require(c.dataset.schema.task == c.task, "dataset.schema.task disagrees with task");
  } else {
    throw ConfigError("dataset.source must be synthetic or csv");
  }

  const auto& sur = merged.at("surrogate");
  c.surrogate_path = get<std::string>(sur, "surrogate", "path");
  c.surrogate.ridge = get<double>(sur, "surrogate", "ridge");
  c.surrogate.side_info.mc_samples = get<std::size_t>(sur, "surrogate", "mc_samples");
  const auto cu = get<std::string>(sur, "surrogate", "class_utility");
  require(cu == "fast" || cu == "monte-carlo", "surrogate.class_utility must be fast or monte-carlo");
  c.surrogate.side_info.class_utility = cu == "fast" ? ClassUtility::kFast : ClassUtility::kMonteCarlo;
  require(c.surrogate.ridge >= 0.0, "surrogate.ridge must be >= 0");
  require(c.surrogate.side_info.mc_samples >= 2, "surrogate.mc_samples must be >= 2");

  const auto& ag = merged.at("agent");
  auto& a = c.agent;
  a.hidden = get<std::vector<std::size_t>>(ag, "agent", "hidden");
  a.gamma = get<double>(ag, "agent", "gamma");
  a.lambda = get<double>(ag, "agent", "lambda");
  a.ppo.clip = get<double>(ag, "agent", "clip");
  a.ppo.epochs = get<std::size_t>(ag, "agent", "epochs");
  a.ppo.minibatch = get<std::size_t>(ag, "agent", "minibatch");
  a.ppo.value_coef = get<double>(ag, "agent", "value_coef");
  a.ppo.prediction_coef = get<double>(ag, "agent", "prediction_coef");
  a.ppo.entropy_coef = get<double>(ag, "agent", "entropy_coef");
  a.ppo.adam.learning_rate = get<double>(ag, "agent", "learning_rate");
  a.ppo.adam.max_grad_norm = get<double>(ag, "agent", "max_grad_norm");
  a.iterations = get<std::size_t>(ag, "agent", "iterations");
  a.episodes_per_iteration = get<std::size_t>(ag, "agent", "episodes_per_iteration");
  a.terminal_shaping = get<bool>(ag, "agent", "terminal_shaping");
  a.train_terminal = parse_terminal_source(get<std::string>(ag, "agent", "train_terminal"));
  a.curve_window = get<std::size_t>(ag, "agent", "curve_window");
  a.seed = c.seed;
  a.side_info_config = c.surrogate.side_info;
  c.resume = get<std::string>(ag, "agent", "resume");
  require(!a.hidden.empty(), "agent.hidden needs at least one layer");
  for (auto h : a.hidden) require(h > 0, "agent.hidden sizes must be positive");
  require(a.gamma > 0.0 && a.gamma <= 1.0, "agent.gamma must lie in (0, 1]");
  require(a.lambda >= 0.0 && a.lambda <= 1.0, "agent.lambda must lie in [0, 1]");
  require(a.ppo.clip > 0.0, "agent.clip must be > 0");
  require(a.ppo.epochs >= 1 && a.ppo.minibatch >= 1, "agent.epochs and agent.minibatch must be >= 1");
  require(a.ppo.adam.learning_rate > 0.0, "agent.learning_rate must be > 0");
  require(a.iterations >= 1 && a.episodes_per_iteration >= 1, "agent.iterations and episodes_per_iteration must be >= 1");

  const auto& ab = merged.at("ablation");
  a.shaping = !get<bool>(ab, "ablation", "no_rm");
  a.side_info = !get<bool>(ab, "ablation", "no_aux");

  const auto& cost = merged.at("cost");
  c.alpha = get<double>(cost, "cost", "alpha");
  require(c.alpha >= 0.0, "cost.alpha must be >= 0");
  if (!cost.at("costs").is_null()) c.costs = get<std::vector<double>>(cost, "cost", "costs");
  c.constraint = parse_constraint(get<std::string>(merged, "", "constraint"));
  if (!merged.at("budget").is_null()) {
    c.budget = get<std::size_t>(merged, "", "budget");
    require(*c.budget >= 1, "budget must be >= 1");
  }

  const auto& g = merged.at("greedy");
  c.greedy.threshold = get<double>(g, "greedy", "threshold");
  c.greedy.threshold_for_air = get<bool>(g, "greedy", "threshold_for_air");
  c.greedy.utilities = c.surrogate.side_info;
  c.greedy.budget = c.budget;

  const auto& dir = merged.at("dirichlet");
  c.dirichlet.concentration = get<double>(dir, "dirichlet", "concentration");
  c.dirichlet.samples = get<std::size_t>(dir, "dirichlet", "samples");
  c.dirichlet.horizon = get<std::size_t>(dir, "dirichlet", "horizon");
  require(c.dirichlet.concentration > 0.0, "dirichlet.concentration must be > 0");
  require(c.dirichlet.samples >= 1, "dirichlet.samples must be >= 1");

  const auto& ev = merged.at("evaluate");
  c.evaluate.policy = parse_policy_kind(get<std::string>(ev, "evaluate", "policy"));
  c.evaluate.split = parse_split(get<std::string>(ev, "evaluate", "split"));
  c.evaluate.bootstrap = get<std::size_t>(ev, "evaluate", "bootstrap");
  c.evaluate.checkpoint = get<std::string>(ev, "evaluate", "checkpoint");
  const auto ts = get<std::string>(ev, "evaluate", "terminal_source");
  if (ts != "auto") c.evaluate.terminal_source = parse_terminal_source(ts);

  if (!merged.at("trace").at("instance").is_null()) c.trace_instance = get<std::size_t>(merged.at("trace"), "trace", "instance");

  const auto& sw = merged.at("sweep");
  c.sweep.policy = parse_policy_kind(get<std::string>(sw, "sweep", "policy"));
  c.sweep.axis = parse_sweep_axis(get<std::string>(sw, "sweep", "axis"));
  c.sweep.grid = get<std::vector<double>>(sw, "sweep", "grid");

  const auto& abl = merged.at("ablate");
  c.ablate.variants = get<std::vector<std::string>>(abl, "ablate", "variants");
  for (const auto& v : c.ablate.variants) find_variant(v);
  c.ablate.policies.clear();
  for (const auto& p : get<std::vector<std::string>>(abl, "ablate", "policies")) c.ablate.policies.push_back(parse_policy_kind(p));
  c.ablate.termination = get<bool>(abl, "ablate", "termination");
  c.ablate.fixed_budget = get<bool>(abl, "ablate", "fixed_budget");
  c.ablate.budgets = get<std::vector<std::size_t>>(abl, "ablate", "budgets");
  c.ablate.seeds = get<std::vector<std::uint64_t>>(abl, "ablate", "seeds");
  c.ablate.threads = c.threads;

  const auto& mi = merged.at("micro");
  c.micro.levels = get<std::vector<std::size_t>>(mi, "micro", "levels");
  c.micro.classes = get<std::size_t>(mi, "micro", "classes");
  c.micro.count = get<std::size_t>(mi, "micro", "count");
  c.micro.gamma = get<double>(mi, "micro", "gamma");
  c.micro.alpha = get<double>(mi, "micro", "alpha");
  c.micro.state_cap = get<std::size_t>(mi, "micro", "state_cap");
  require(!c.micro.levels.empty() && c.micro.levels.size() <= 4, "micro.levels must describe 1 to 4 features");
  for (auto l : c.micro.levels) require(l >= 2 && l <= 3, "micro.levels entries must be 2 or 3");
  require(c.micro.classes >= 2, "micro.classes must be >= 2");
  require(c.micro.gamma > 0.0 && c.micro.gamma <= 1.0, "micro.gamma must lie in (0, 1]");
  require(c.micro.alpha >= 0.0, "micro.alpha must be >= 0");
  return c;
}

/// Defaults, then the config file, then each override in order.
inline RunConfig load_run_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
  json merged = default_config();
  if (path) merge_config(merged, read_json_file(*path));
  for (const auto& o : overrides) apply_override(merged, o);
  return parse_run_config(merged);
}

}  // namespace gsmrl::cli
