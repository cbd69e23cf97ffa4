#include <algorithm>
#include <cmath>
#include <map>

#include "mcpeval/error.hpp"
#include "mcpeval/protocol.hpp"
#include "text_util.hpp"

namespace mcpeval {

const char* to_string(AggregationMode mode) {
  return mode == AggregationMode::PerRepeat ? "per_repeat" : "per_compound_median";
}

const char* to_string(DispersionLabel label) { return label == DispersionLabel::Sd ? "sd" : "se"; }

Dataset DataSource::load() const {
  if (path) return load_dataset(*path, label_column);
  if (synthetic) return generate_synthetic(*synthetic);
  throw Error(ErrorCode::ConfigError, "no data source: set data.path or synth.n/synth.dim");
}

PointModel ModelSpec::train(const Dataset& ds, std::uint64_t seed) const {
  if (kind == ModelKind::Logistic) return train_logistic(ds, logistic);
  ForestParams params = forest;
  params.seed = seed;
  return train_random_forest(ds, params);
}

std::string ModelSpec::describe() const {
  if (kind == ModelKind::Logistic) {
    return "logistic(l2=" + detail::format_double(logistic.l2) +
           ",learning_rate=" + detail::format_double(logistic.learning_rate) +
           ",iterations=" + std::to_string(logistic.iterations) + ")";
  }
  const std::string mtry =
      forest.features_per_split ? std::to_string(*forest.features_per_split) : std::string("sqrt(dim)");
  return "random_forest(trees=" + std::to_string(forest.n_trees) + ",depth=" + std::to_string(forest.max_depth) +
         ",min_leaf=" + std::to_string(forest.min_leaf) + ",mtry=" + mtry + ")";
}

void ExperimentConfig::validate() const {
  if (data.path.has_value() == data.synthetic.has_value()) {
    throw Error(ErrorCode::ConfigError, "exactly one of data.path or synth.* must be given");
  }
  if (data.synthetic) {
    const auto& s = *data.synthetic;
    if (s.n < 2) throw Error(ErrorCode::ConfigError, "synth.n must be at least 2");
    if (s.dim < 1) throw Error(ErrorCode::ConfigError, "synth.dim must be at least 1");
    if (!(s.class_balance > 0.0 && s.class_balance < 1.0)) {
      throw Error(ErrorCode::ConfigError, "synth.balance must lie strictly inside (0,1)");
    }
    if (!(s.separation >= 0.0) || !std::isfinite(s.separation)) {
      throw Error(ErrorCode::ConfigError, "synth.separation must be finite and >= 0");
    }
  }
  split.validate();
  if (epsilons.empty()) throw Error(ErrorCode::ConfigError, "eps.grid must not be empty");
  if (scenarios.empty()) throw Error(ErrorCode::ConfigError, "scenarios must not be empty");
  if (model.kind == ModelKind::RandomForest) {
    if (model.forest.n_trees < 1) throw Error(ErrorCode::ConfigError, "model.trees must be at least 1");
    if (model.forest.max_depth < 1) throw Error(ErrorCode::ConfigError, "model.depth must be at least 1");
    if (model.forest.min_leaf < 1) throw Error(ErrorCode::ConfigError, "model.min_leaf must be at least 1");
    if (model.forest.features_per_split && *model.forest.features_per_split < 1) {
      throw Error(ErrorCode::ConfigError, "model.features_per_split must be at least 1");
    }
  } else {
    model.logistic.validate();
  }
}

std::vector<std::string> config_keys() {
  return {"data.path",          "data.label_column",  "synth.n",
          "synth.dim",          "synth.balance",      "synth.separation",
          "synth.seed",         "model.kind",         "model.trees",
          "model.depth",        "model.min_leaf",     "model.features_per_split",
          "model.l2",           "model.learning_rate", "model.iterations",
          "split.test_fraction", "split.calibration_fraction", "split.repeats",
          "split.stratified",   "eps.grid",           "scenarios",
          "aggregation.mode",   "report.dispersion",  "seed",
          "output"};
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> out;
  if (data.path) {
    out.emplace_back("data.path", data.path->generic_string());
    out.emplace_back("data.label_column", data.label_column);
  }
  if (data.synthetic) {
    const auto& s = *data.synthetic;
    out.emplace_back("synth.n", std::to_string(s.n));
    out.emplace_back("synth.dim", std::to_string(s.dim));
    out.emplace_back("synth.balance", detail::format_double(s.class_balance));
    out.emplace_back("synth.separation", detail::format_double(s.separation));
    out.emplace_back("synth.seed", std::to_string(s.seed));
  }
  out.emplace_back("model.kind", to_string(model.kind));
  if (model.kind == ModelKind::RandomForest) {
    out.emplace_back("model.trees", std::to_string(model.forest.n_trees));
    out.emplace_back("model.depth", std::to_string(model.forest.max_depth));
    out.emplace_back("model.min_leaf", std::to_string(model.forest.min_leaf));
    out.emplace_back("model.features_per_split", model.forest.features_per_split
                                                      ? std::to_string(*model.forest.features_per_split)
                                                      : std::string("sqrt"));
  } else {
    out.emplace_back("model.l2", detail::format_double(model.logistic.l2));
    out.emplace_back("model.learning_rate", detail::format_double(model.logistic.learning_rate));
    out.emplace_back("model.iterations", std::to_string(model.logistic.iterations));
  }
  out.emplace_back("split.test_fraction", detail::format_double(split.test_fraction));
  out.emplace_back("split.calibration_fraction", detail::format_double(split.calibration_fraction));
  out.emplace_back("split.repeats", std::to_string(split.repeats));
  out.emplace_back("split.stratified", split.stratified ? "true" : "false");
  std::string grid;
  for (const auto& e : epsilons) grid += (grid.empty() ? "" : ",") + detail::format_shortest(e.significance());
  out.emplace_back("eps.grid", grid);
  std::string sc;
  for (auto k : scenarios) sc += (sc.empty() ? "" : ",") + std::string(to_string(k));
  out.emplace_back("scenarios", sc);
  out.emplace_back("aggregation.mode", to_string(aggregation));
  out.emplace_back("report.dispersion", to_string(dispersion));
  out.emplace_back("seed", std::to_string(split.master_seed));
  if (output) out.emplace_back("output", output->generic_string());
  return out;
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw Error(ErrorCode::ConfigError, key + ": invalid value '" + value + "' (expected " + expected + ")");
}

double real_value(const std::string& key, const std::string& value) {
  auto v = detail::parse_double(value);
  if (!v || !std::isfinite(*v)) bad_value(key, value, "a finite real number");
  return *v;
}

std::uint64_t uint_value(const std::string& key, const std::string& value) {
  auto v = detail::parse_uint(value);
  if (!v) bad_value(key, value, "a nonnegative integer");
  return *v;
}

bool bool_value(const std::string& key, const std::string& value) {
  const std::string v = detail::lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::string> list_value(const std::string& value) {
  std::vector<std::string> items;
  std::string current;
  for (char c : value) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!current.empty()) items.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) items.push_back(std::move(current));
  return items;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  const auto keys = config_keys();
  std::map<std::string, std::string> entries;
  std::size_t line_no = 0;
  for (std::string_view raw : detail::split_lines(text)) {
    ++line_no;
    std::string line(raw);
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = detail::trim(std::string_view(line).substr(0, eq));
    std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorCode::ConfigError, key + ": unknown configuration key");
    }
    if (!entries.emplace(key, value).second) {
      throw Error(ErrorCode::ConfigError, key + ": key given more than once");
    }
  }

  ExperimentConfig cfg;
  bool any_synth = false;
  SyntheticSpec synth;
  synth.class_balance = 0.5;
  synth.separation = 1.0;
  std::optional<std::uint64_t> synth_seed;
  bool has_n = false, has_dim = false;

  for (const auto& [key, value] : entries) {
    if (key == "data.path") {
      if (value.empty()) bad_value(key, value, "a file path");
      cfg.data.path = value;
    } else if (key == "data.label_column") {
      cfg.data.label_column = value;
    } else if (key == "synth.n") {
      synth.n = uint_value(key, value);
      any_synth = has_n = true;
    } else if (key == "synth.dim") {
      synth.dim = uint_value(key, value);
      any_synth = has_dim = true;
    } else if (key == "synth.balance") {
      synth.class_balance = real_value(key, value);
      if (!(synth.class_balance > 0.0 && synth.class_balance < 1.0)) bad_value(key, value, "a real in (0,1)");
      any_synth = true;
    } else if (key == "synth.separation") {
      synth.separation = real_value(key, value);
      if (synth.separation < 0.0) bad_value(key, value, "a real >= 0");
      any_synth = true;
    } else if (key == "synth.seed") {
      synth_seed = uint_value(key, value);
      any_synth = true;
    } else if (key == "model.kind") {
      const std::string v = detail::lower(value);
      if (v == "random_forest" || v == "rf") cfg.model.kind = ModelKind::RandomForest;
      else if (v == "logistic") cfg.model.kind = ModelKind::Logistic;
      else bad_value(key, value, "random_forest or logistic");
    } else if (key == "model.trees") {
      cfg.model.forest.n_trees = uint_value(key, value);
      if (cfg.model.forest.n_trees < 1) bad_value(key, value, "an integer >= 1");
    } else if (key == "model.depth") {
      cfg.model.forest.max_depth = uint_value(key, value);
      if (cfg.model.forest.max_depth < 1) bad_value(key, value, "an integer >= 1");
    } else if (key == "model.min_leaf") {
      cfg.model.forest.min_leaf = uint_value(key, value);
      if (cfg.model.forest.min_leaf < 1) bad_value(key, value, "an integer >= 1");
    } else if (key == "model.features_per_split") {
      if (detail::lower(value) != "sqrt") {
        cfg.model.forest.features_per_split = uint_value(key, value);
        if (*cfg.model.forest.features_per_split < 1) bad_value(key, value, "an integer >= 1 or 'sqrt'");
      }
    } else if (key == "model.l2") {
      cfg.model.logistic.l2 = real_value(key, value);
      if (cfg.model.logistic.l2 < 0.0) bad_value(key, value, "a real >= 0");
    } else if (key == "model.learning_rate") {
      cfg.model.logistic.learning_rate = real_value(key, value);
      if (!(cfg.model.logistic.learning_rate > 0.0)) bad_value(key, value, "a real > 0");
    } else if (key == "model.iterations") {
      cfg.model.logistic.iterations = uint_value(key, value);
      if (cfg.model.logistic.iterations < 1) bad_value(key, value, "an integer >= 1");
    } else if (key == "split.test_fraction") {
      cfg.split.test_fraction = real_value(key, value);
      if (!(cfg.split.test_fraction > 0.0 && cfg.split.test_fraction < 1.0)) bad_value(key, value, "a real in (0,1)");
    } else if (key == "split.calibration_fraction") {
      cfg.split.calibration_fraction = real_value(key, value);
      if (!(cfg.split.calibration_fraction > 0.0 && cfg.split.calibration_fraction < 1.0)) {
        bad_value(key, value, "a real in (0,1)");
      }
    } else if (key == "split.repeats") {
      cfg.split.repeats = uint_value(key, value);
      if (cfg.split.repeats < 1) bad_value(key, value, "an integer >= 1");
    } else if (key == "split.stratified") {
      cfg.split.stratified = bool_value(key, value);
    } else if (key == "eps.grid") {
      cfg.epsilons.clear();
      const auto items = list_value(value);
      if (items.empty()) bad_value(key, value, "a nonempty list of reals in (0,1)");
      for (const auto& item : items) {
        auto v = detail::parse_double(item);
        if (!v || !(*v > 0.0 && *v < 1.0)) bad_value(key, item, "significance levels strictly inside (0,1)");
        cfg.epsilons.emplace_back(*v);
      }
    } else if (key == "scenarios") {
      cfg.scenarios.clear();
      const auto items = list_value(value);
      if (items.empty()) bad_value(key, value, "a nonempty scenario list");
      for (const auto& item : items) {
        if (item == "all") {
          cfg.scenarios = all_scenarios();
          continue;
        }
        auto k = parse_scenario(item);
        if (!k) {
          bad_value(key, item,
                    "incl, excl, uncertain_out, empty_out_both_positive, empty_out_both_negative, "
                    "empty_out_both_dominant or all");
        }
        if (std::find(cfg.scenarios.begin(), cfg.scenarios.end(), *k) == cfg.scenarios.end()) {
          cfg.scenarios.push_back(*k);
        }
      }
    } else if (key == "aggregation.mode") {
      const std::string v = detail::lower(value);
      if (v == "per_repeat") cfg.aggregation = AggregationMode::PerRepeat;
      else if (v == "per_compound_median") cfg.aggregation = AggregationMode::PerCompoundMedian;
      else bad_value(key, value, "per_repeat or per_compound_median");
    } else if (key == "report.dispersion") {
      const std::string v = detail::lower(value);
      if (v == "sd") cfg.dispersion = DispersionLabel::Sd;
      else if (v == "se") cfg.dispersion = DispersionLabel::Se;
      else bad_value(key, value, "sd or se");
    } else if (key == "seed") {
      cfg.split.master_seed = uint_value(key, value);
    } else if (key == "output") {
      if (!value.empty()) cfg.output = value;
    }
  }

  if (any_synth) {
    if (!has_n || !has_dim) throw Error(ErrorCode::ConfigError, "synth.n and synth.dim are both required");
    synth.seed = synth_seed.value_or(cfg.split.master_seed);
    cfg.data.synthetic = synth;
  }
  if (cfg.data.path && cfg.data.synthetic) {
    throw Error(ErrorCode::ConfigError, "data.path and synth.* are mutually exclusive");
  }
  if (!cfg.data.path && !cfg.data.synthetic) {
    throw Error(ErrorCode::ConfigError, "data.path: no data source (set data.path or synth.n/synth.dim)");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path));
}

}  // namespace mcpeval
