#pragma once

#include <CLI11.hpp>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gsmrl/cli/commands.hpp"

namespace gsmrl::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

struct CommonFlags {
  std::optional<std::string> config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> policy;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> instance;
  std::optional<std::size_t> iterations;
  std::optional<double> alpha;
  std::optional<std::size_t> budget;
  std::optional<std::string> resume;
  std::optional<std::size_t> threads;

  /// Dedicated flags are applied after --set, so they win over both the file and --set.
  std::vector<std::string> overrides() const {
    std::vector<std::string> o = set;
    auto add = [&](const char* key, const auto& v) {
      if (v) o.push_back(std::string(key) + "=" + json(*v).dump());
    };
    add("seed", seed);
    add("output_dir", out);
    add("evaluate.policy", policy);
    add("evaluate.checkpoint", checkpoint);
    add("trace.instance", instance);
    add("agent.iterations", iterations);
    add("cost.alpha", alpha);
    add("budget", budget);
    add("agent.resume", resume);
    add("threads", threads);
    return o;
  }
};

inline void add_common_flags(CLI::App& sub, CommonFlags& f) {
  sub.add_option("-c,--config", f.config, "JSON config file");
  sub.add_option("-s,--set", f.set, "override a config key, e.g. --set agent.gamma=0.9 (repeatable)");
  sub.add_option("--seed", f.seed, "random seed");
  sub.add_option("-o,--out", f.out, "output directory");
  sub.add_option("--threads", f.threads, "worker threads for grid cells (0: all cores)");
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cost-sensitive active feature acquisition with a generative surrogate and a learned policy"};
  app.require_subcommand(1);
  CommonFlags flags;
  using Command = std::function<void(const RunConfig&, std::ostream&)>;
  std::map<CLI::App*, Command> commands;

  auto sub = [&](const char* name, const char* help, Command cmd) {
    auto* s = app.add_subcommand(name, help);
    add_common_flags(*s, flags);
    commands[s] = std::move(cmd);
    return s;
  };
  sub("fit-surrogate", "fit the surrogate on the train split", cmd_fit_surrogate);
  auto* train = sub("train-agent", "train the acquisition policy", cmd_train_agent);
  train->add_option("--iterations", flags.iterations, "training iterations");
  train->add_option("--alpha", flags.alpha, "cost trade-off");
  train->add_option("--budget", flags.budget, "hard acquisition budget");
  train->add_option("--resume", flags.resume, "checkpoint to continue from");
  for (const char* name : {"evaluate", "trace"}) {
    auto* s = sub(name, name[0] == 'e' ? "evaluate a policy on a split" : "log one acquisition episode step by step",
                  name[0] == 'e' ? Command(cmd_evaluate) : Command(cmd_trace));
    s->add_option("--policy", flags.policy, "gsmrl, greedy, static, random or dirichlet");
    s->add_option("--checkpoint", flags.checkpoint, "checkpoint for the gsmrl policy");
    s->add_option("--alpha", flags.alpha, "cost trade-off");
    s->add_option("--budget", flags.budget, "hard acquisition budget");
    if (name[0] == 't') s->add_option("--instance", flags.instance, "instance id to trace");
  }
  sub("sweep", "evaluate one policy over a grid of alphas or budgets", cmd_sweep);
  sub("ablate", "run the ablation suite", cmd_ablate);
  sub("solve-micro", "solve random micro-MDPs exactly, with and without shaping", cmd_solve_micro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    log << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    const auto config = load_run_config(flags.config, flags.overrides());
    commands.at(chosen)(config, log);
    return kSuccess;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace gsmrl::cli
