#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcpeval/classifier.hpp"
#include "mcpeval/conformal.hpp"
#include "mcpeval/dataset.hpp"
#include "mcpeval/metrics.hpp"

namespace mcpeval {

enum class AggregationMode { PerRepeat, PerCompoundMedian };
enum class DispersionLabel { Sd, Se };

const char* to_string(AggregationMode mode);
const char* to_string(DispersionLabel label);

struct DataSource {
  std::optional<std::filesystem::path> path;
  std::string label_column = "label";
  std::optional<SyntheticSpec> synthetic;

  Dataset load() const;
};

struct ModelSpec {
  ModelKind kind = ModelKind::RandomForest;
  ForestParams forest;
  LogisticParams logistic;

  // Logistic training ignores the seed.
  PointModel train(const Dataset& ds, std::uint64_t seed) const;
  // Parameters without the seed, e.g. "random_forest(trees=300,depth=20,min_leaf=1,mtry=sqrt(dim))".
  std::string describe() const;
};

struct ExperimentConfig {
  DataSource data;
  ModelSpec model;
  SplitSpec split;
  std::vector<Epsilon> epsilons = default_epsilon_grid();
  std::vector<ScenarioKind> scenarios = all_scenarios();
  AggregationMode aggregation = AggregationMode::PerRepeat;
  DispersionLabel dispersion = DispersionLabel::Sd;
  std::optional<std::filesystem::path> output;

  void validate() const;
  // Canonical key = value listing with every default made explicit.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::vector<std::string> config_keys();

struct AggregateStat {
  double mean = 0.0;
  double median = 0.0;
  std::optional<double> sd;  // sample, n - 1 denominator; unset when n == 1
  std::optional<double> se;  // sd / sqrt(n)
  std::size_t n = 0;
  std::optional<DispersionLabel> dispersion_label;

  std::optional<double> dispersion() const;
};

AggregateStat aggregate(std::span<const double> values, DispersionLabel label = DispersionLabel::Sd);

// Median with the mean-of-middle-two rule for even counts.
double median_of(std::vector<double> values);

struct NamedValue {
  std::string name;
  std::optional<double> value;  // unset when the metric is undefined
};

struct NamedAggregate {
  std::string name;
  std::optional<AggregateStat> stat;  // unset when no trial defined the value
  std::size_t undefined_count = 0;
};

// Aggregates each named statistic across trials, skipping undefined values.
// Every trial must list the same names in the same order.
std::vector<NamedAggregate> aggregate_trials(const std::vector<std::vector<NamedValue>>& trials,
                                             DispersionLabel label);

struct ScenarioEvaluation {
  ScenarioKind kind;
  ScenarioOutcome outcome;
  std::optional<MetricTriple> metrics;
  std::string undefined_reason;
};

struct EpsilonEvaluation {
  Epsilon epsilon;
  McpConfusion confusion;
  SetRates rates;
  std::vector<ScenarioEvaluation> scenarios;
};

EpsilonEvaluation evaluate_sets(std::span<const Label> truths, std::span<const PredictionSet> sets,
                                Epsilon eps, std::span<const ScenarioKind> scenarios, Label dominant);

struct InstancePrediction {
  std::string id;
  Label truth = Label::Negative;
  double point_proba = 0.0;  // model trained on the full training set
  double mcp_proba = 0.0;    // model trained on the proper training set
  PValuePair p;
};

struct RepeatRecord {
  std::size_t index = 0;
  std::string point_model;
  std::string mcp_model;
  std::size_t train_size = 0, test_size = 0, proper_size = 0, calibration_size = 0;
  Label dominant = Label::Negative;
  BinaryConfusion point_confusion;
  std::optional<MetricTriple> point;
  std::vector<EpsilonEvaluation> mcp;
  std::vector<InstancePrediction> predictions;
};

struct CompoundObservation {
  std::string id;
  Label truth = Label::Negative;
  double proba = 0.0;
  PValuePair p;
};

struct CompoundMedian {
  std::string id;
  Label truth = Label::Negative;
  std::size_t times_tested = 0;
  double proba = 0.0;
  PValuePair p;
};

// Medians per instance over the repeats in which it was tested. Output
// follows `ids`; an id without observations raises InstanceNeverTested.
std::vector<CompoundMedian> per_compound_median(std::span<const CompoundObservation> observations,
                                                std::span<const std::string> ids);

struct MedianResult {
  std::vector<CompoundMedian> compounds;
  Label dominant = Label::Negative;
  BinaryConfusion point_confusion;
  std::optional<MetricTriple> point;
  std::vector<EpsilonEvaluation> mcp;
};

extern const char* const kMedianInterpretation;

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RepeatRecord> repeats;
  std::vector<NamedAggregate> aggregates;
  std::optional<MedianResult> median;
};

// Named statistics for one repeat, in report order.
std::vector<NamedValue> repeat_statistics(const RepeatRecord& record);
std::vector<NamedValue> mcp_statistics(std::span<const EpsilonEvaluation> evals);
std::string epsilon_key(Epsilon eps);

struct RunOptions {
  // Worker threads for independent repeats/trials; results merge in index order.
  std::size_t threads = 1;
};

// Split seeds, calibration seeds and model seeds are all derived from
// config.split.master_seed:
//   train/test      derive_seed(seed, {("split", i)})
//   proper/calib    derive_seed(derive_seed(seed, {("repeat", i)}), {("calibration", 0)})
//   model           derive_seed(seed, {("model", i)})
ExperimentResult run_repeated_split(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_repeated_split(const ExperimentConfig& config, const Dataset& data,
                                    const RunOptions& options = {});

enum class StudyKind { Seed, Calibration };
const char* to_string(StudyKind kind);

struct VariabilityTrial {
  std::size_t index = 0;
  std::string model;
  std::vector<NamedValue> values;
};

struct InstanceSpread {
  std::string id;
  Label truth = Label::Negative;
  double mean_proba = 0.0;
  double min_proba = 0.0;
  double max_proba = 0.0;
  bool label_flipped = false;
};

struct VariabilityResult {
  StudyKind kind = StudyKind::Seed;
  ExperimentConfig config;
  std::size_t train_size = 0, test_size = 0;
  std::vector<VariabilityTrial> trials;
  std::vector<NamedAggregate> aggregates;
  // Seed study only: point-label flips and probability spread over the test set.
  std::optional<std::size_t> label_flips;
  std::optional<double> max_proba_spread;
  std::vector<InstanceSpread> instances;
};

// One fixed partition (repeat 0); the model is retrained with seeds
// derive_seed(seed, {("seed_study", s)}).
VariabilityResult run_seed_variability(const ExperimentConfig& config, std::size_t n_seeds,
                                       const RunOptions& options = {});
VariabilityResult run_seed_variability(const ExperimentConfig& config, const Dataset& data, std::size_t n_seeds,
                                       const RunOptions& options = {});

// One fixed train/test split and model seed; the proper/calibration split is
// redrawn with resample indices 0..n-1.
VariabilityResult run_calibration_variability(const ExperimentConfig& config, std::size_t n_resamples,
                                              const RunOptions& options = {});
VariabilityResult run_calibration_variability(const ExperimentConfig& config, const Dataset& data,
                                              std::size_t n_resamples, const RunOptions& options = {});

}  // namespace mcpeval
