#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gsmrl/core.hpp"
#include "gsmrl/random.hpp"

namespace gsmrl {

enum class SplitTag : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

inline const char* to_string(SplitTag s) {
  switch (s) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
    case SplitTag::kTest: return "test";
  }
  return "?";
}

inline SplitTag parse_split(const std::string& name) {
  if (name == "train") return SplitTag::kTrain;
  if (name == "val") return SplitTag::kVal;
  if (name == "test") return SplitTag::kTest;
  throw ConfigError("unknown split '" + name + "'");
}

/// Affine maps fitted on the train split. Features: (x - min) / (max - min);
/// regression targets: (y - mean) / std.
struct Normalization {
  std::vector<double> feature_min;
  std::vector<double> feature_max;
  std::vector<double> target_mean;
  std::vector<double> target_std;

  double normalize_feature(std::size_t i, double raw) const {
    const double span = feature_max[i] - feature_min[i];
    if (!(span > 0.0)) return 0.0;
    return (raw - feature_min[i]) / span;
  }
  double denormalize_feature(std::size_t i, double v) const {
    return feature_min[i] + v * (feature_max[i] - feature_min[i]);
  }
  double denormalize_target(std::size_t k, double v) const { return target_mean[k] + v * target_std[k]; }
};

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::kClassification;
  std::size_t d = 0;
  std::size_t num_classes = 0;  // 0 for regression / AIR
  std::size_t target_dim = 0;   // regression only
  std::vector<Instance> instances;
  std::vector<SplitTag> split;
  Normalization normalization;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::optional<std::vector<double>> feature_costs;
  std::vector<std::string> warnings;

  std::vector<std::size_t> indices(SplitTag tag) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < instances.size(); ++k)
      if (split[k] == tag) out.push_back(k);
    return out;
  }

  std::vector<const Instance*> view(SplitTag tag) const {
    std::vector<const Instance*> out;
    for (std::size_t k = 0; k < instances.size(); ++k)
      if (split[k] == tag) out.push_back(&instances[k]);
    return out;
  }
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// Seeded shuffle into train/val/test tags.
inline std::vector<SplitTag> make_split(std::size_t n, SplitFractions fractions, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const double total = fractions.train + fractions.val + fractions.test;
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.train / total));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.val / total));
  std::vector<SplitTag> tags(n, SplitTag::kTest);
  for (std::size_t r = 0; r < n; ++r) {
    if (r < n_train) tags[perm[r]] = SplitTag::kTrain;
    else if (r < n_train + n_val) tags[perm[r]] = SplitTag::kVal;
  }
  return tags;
}

/// Fits the normalization on train rows (non-missing cells only) and applies it in place.
/// `raw` holds unnormalized feature rows; missing cells are replaced by the train column mean.
inline void normalize_dataset(Dataset& ds) {
  const std::size_t d = ds.d;
  auto& norm = ds.normalization;
  norm.feature_min.assign(d, std::numeric_limits<double>::infinity());
  norm.feature_max.assign(d, -std::numeric_limits<double>::infinity());
  std::vector<double> sum(d, 0.0);
  std::vector<std::size_t> count(d, 0);
  for (std::size_t k = 0; k < ds.instances.size(); ++k) {
    if (ds.split[k] != SplitTag::kTrain) continue;
    const auto& inst = ds.instances[k];
    for (std::size_t i = 0; i < d; ++i) {
      if (inst.is_missing(i)) continue;
      norm.feature_min[i] = std::min(norm.feature_min[i], inst.features[i]);
      norm.feature_max[i] = std::max(norm.feature_max[i], inst.features[i]);
      sum[i] += inst.features[i];
      ++count[i];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (count[i] == 0) {
      norm.feature_min[i] = norm.feature_max[i] = 0.0;
      ds.warnings.push_back("feature " + std::to_string(i) + " has no observed train values");
    } else if (norm.feature_max[i] == norm.feature_min[i]) {
      ds.warnings.push_back("feature " + std::to_string(i) + " is constant on train; normalized to 0");
    }
  }
  for (auto& inst : ds.instances) {
    for (std::size_t i = 0; i < d; ++i) {
      if (inst.is_missing(i)) {
        const double mean_raw = count[i] ? sum[i] / static_cast<double>(count[i]) : 0.0;
        inst.features[i] = norm.normalize_feature(i, mean_raw);
      } else {
        inst.features[i] = norm.normalize_feature(i, inst.features[i]);
      }
    }
  }
  if (ds.task == TaskKind::kRegression) {
    const std::size_t m = ds.target_dim;
    norm.target_mean.assign(m, 0.0);
    norm.target_std.assign(m, 1.0);
    std::vector<double> sq(m, 0.0);
    std::size_t n = 0;
    for (std::size_t k = 0; k < ds.instances.size(); ++k) {
      if (ds.split[k] != SplitTag::kTrain) continue;
      ++n;
      for (std::size_t j = 0; j < m; ++j) norm.target_mean[j] += ds.instances[k].target[j];
    }
    if (n == 0) throw Error("no data");
    for (std::size_t j = 0; j < m; ++j) norm.target_mean[j] /= static_cast<double>(n);
    for (std::size_t k = 0; k < ds.instances.size(); ++k) {
      if (ds.split[k] != SplitTag::kTrain) continue;
      for (std::size_t j = 0; j < m; ++j) {
        const double z = ds.instances[k].target[j] - norm.target_mean[j];
        sq[j] += z * z;
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double sd = std::sqrt(sq[j] / static_cast<double>(n));
      norm.target_std[j] = sd > 0.0 ? sd : 1.0;
    }
    for (auto& inst : ds.instances)
      for (std::size_t j = 0; j < m; ++j)
        inst.target[j] = (inst.target[j] - norm.target_mean[j]) / norm.target_std[j];
  }
}

/// CSV schema (JSON): which column is the target, the missing-value marker,
/// the task kind and optional per-feature costs.
struct CsvSchema {
  std::optional<std::string> target_column;  // required unless task == air
  std::string missing_marker = "?";
  TaskKind task = TaskKind::kClassification;
  std::optional<std::vector<double>> costs;
  SplitFractions split;
  std::uint64_t seed = 0;

  static CsvSchema from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {"target", "missing", "task", "costs", "split", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        throw ConfigError("unknown schema key '" + it.key() + "'");
    CsvSchema s;
    if (j.contains("target")) s.target_column = j.at("target").get<std::string>();
    if (j.contains("missing")) s.missing_marker = j.at("missing").get<std::string>();
    if (j.contains("task")) s.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("costs")) s.costs = j.at("costs").get<std::vector<double>>();
    if (j.contains("split")) {
      auto v = j.at("split").get<std::vector<double>>();
      if (v.size() != 3) throw ConfigError("schema split must have three fractions");
      s.split = {v[0], v[1], v[2]};
    }
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (s.task != TaskKind::kAir && !s.target_column) throw ConfigError("schema needs a target column");
    return s;
  }

  static CsvSchema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema '" + path + "'");
    return from_json(nlohmann::json::parse(in));
  }
};

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(trim(cell));
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses a headered CSV, splits it by seeded shuffle, maps class labels (fitted on train)
/// and normalizes features to [0, 1] on train statistics.
inline Dataset load_csv(std::istream& in, const CsvSchema& schema, std::string name = "csv") {
  std::string line;
  if (!std::getline(in, line)) throw Error("no data");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  std::ptrdiff_t target_col = -1;
  if (schema.target_column) {
    auto it = std::find(header.begin(), header.end(), *schema.target_column);
    if (it == header.end()) throw Error("target column '" + *schema.target_column + "' not in header");
    target_col = it - header.begin();
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.task = schema.task;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (static_cast<std::ptrdiff_t>(c) != target_col) ds.feature_names.push_back(header[c]);
  ds.d = ds.feature_names.size();
  ds.target_dim = schema.task == TaskKind::kRegression ? 1 : 0;

  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw Error("ragged row at line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                  " cells, got " + std::to_string(cells.size()));
    Instance inst;
    inst.id = ds.instances.size();
    inst.features.reserve(ds.d);
    inst.missing.assign(ds.d, false);
    bool any_missing = false;
    std::size_t f = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == target_col) {
        if (schema.task == TaskKind::kClassification) {
          raw_labels.push_back(cells[c]);
        } else {
          auto v = detail::parse_number(cells[c]);
          if (!v) throw Error("non-numeric target '" + cells[c] + "' at line " + std::to_string(line_no));
          inst.target = {*v};
        }
        continue;
      }
      if (cells[c] == schema.missing_marker) {
        inst.features.push_back(0.0);
        inst.missing[f] = true;
        any_missing = true;
      } else {
        auto v = detail::parse_number(cells[c]);
        if (!v)
          throw Error("non-numeric cell '" + cells[c] + "' in column '" + header[c] + "' at line " +
                      std::to_string(line_no));
        inst.features.push_back(*v);
      }
      ++f;
    }
    if (!any_missing) inst.missing.clear();
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) throw Error("no data");
  ds.split = make_split(ds.instances.size(), schema.split, schema.seed);

  if (schema.task == TaskKind::kClassification) {
    std::map<std::string, int> classes;
    for (std::size_t k = 0; k < raw_labels.size(); ++k)
      if (ds.split[k] == SplitTag::kTrain) classes.emplace(raw_labels[k], 0);
    // Numeric labels sort numerically, otherwise lexicographically.
    std::vector<std::string> names;
    for (auto& [n, _] : classes) names.push_back(n);
    const bool numeric = std::all_of(names.begin(), names.end(), [](const std::string& s) {
      return detail::parse_number(s).has_value();
    });
    if (numeric)
      std::sort(names.begin(), names.end(),
                [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
    for (std::size_t k = 0; k < names.size(); ++k) classes[names[k]] = static_cast<int>(k);
    ds.class_names = names;
    ds.num_classes = names.size();
    for (std::size_t k = 0; k < raw_labels.size(); ++k) {
      auto it = classes.find(raw_labels[k]);
      if (it == classes.end())
        throw Error("unknown class label '" + raw_labels[k] + "' in " + to_string(ds.split[k]) + " split");
      ds.instances[k].label = it->second;
    }
  }
  if (schema.costs) {
    if (schema.costs->size() != ds.d) throw ConfigError("schema costs length does not match feature count");
    ds.feature_costs = schema.costs;
  }
  normalize_dataset(ds);
  return ds;
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  return load_csv(in, schema, path);
}

/// Assemble a dataset from raw rows (unnormalized); used by the synthetic generators.
inline Dataset make_dataset(std::string name, TaskKind task, std::vector<Instance> rows, std::size_t num_classes,
                            SplitFractions fractions, std::uint64_t split_seed) {
  if (rows.empty()) throw Error("no data");
  Dataset ds;
  ds.name = std::move(name);
  ds.task = task;
  ds.d = rows.front().features.size();
  ds.num_classes = task == TaskKind::kClassification ? num_classes : 0;
  ds.target_dim = task == TaskKind::kRegression ? rows.front().target.size() : 0;
  for (std::size_t k = 0; k < rows.size(); ++k) rows[k].id = k;
  ds.instances = std::move(rows);
  for (std::size_t i = 0; i < ds.d; ++i) ds.feature_names.push_back("x" + std::to_string(i));
  for (std::size_t c = 0; c < ds.num_classes; ++c) ds.class_names.push_back(std::to_string(c));
  ds.split = make_split(ds.instances.size(), fractions, split_seed);
  normalize_dataset(ds);
  return ds;
}

}  // namespace gsmrl
