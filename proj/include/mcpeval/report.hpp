#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mcpeval/conformal.hpp"
#include "mcpeval/protocol.hpp"

namespace mcpeval {

using Json = nlohmann::ordered_json;

extern const char* const kToolName;
extern const char* const kToolVersion;
extern const char* const kPValueConvention;
extern const char* const kInclusionRule;
extern const char* const kThresholdRule;
extern const char* const kInclCaveat;
extern const char* const kEmptyNote;
extern const char* const kSeedDerivation;

std::string dispersion_definition(DispersionLabel label);

// {statistic, value, median, dispersion, dispersion_label, n, undefined_count}.
// Throws ReportError if a dispersion would be written without its label or n.
Json aggregate_json(const NamedAggregate& agg);

// Walks a document and throws ReportError at the first object carrying a
// "dispersion" member without both "dispersion_label" and "n".
void check_dispersion_labels(const Json& doc);

// "0.8125 ± 0.0312 sd (n=50)", "0.8125 (sd undefined, n=1)" or "undefined (n=0)".
std::string format_plus_minus(const NamedAggregate& agg, int decimals = 4);

Json metric_triple_json(const std::optional<MetricTriple>& m, std::string_view undefined_reason = {});
Json epsilon_evaluation_json(const EpsilonEvaluation& ev);

Json report_json(const ExperimentResult& result);
Json variability_json(const VariabilityResult& result);

// JSON text with a trailing newline; validated by check_dispersion_labels.
std::string serialize(const Json& doc);

PredictionDump prediction_dump(const ExperimentResult& result);

// One row per (experiment, epsilon, scenario).
std::string metrics_csv(std::string_view experiment, const ExperimentConfig& config,
                        const std::vector<NamedAggregate>& aggregates);

std::string variability_trials_csv(const VariabilityResult& result);

std::string summary_table(const ExperimentResult& result);
std::string variability_table(const VariabilityResult& result);

// Eight-cell table: rows are true classes, columns the four set outcomes.
std::string confusion_table(const McpConfusion& c);

// Writes contents via a temporary file and rename, creating parent directories.
void write_report(const std::filesystem::path& path, std::string_view contents);

}  // namespace mcpeval
