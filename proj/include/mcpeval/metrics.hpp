#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcpeval/conformal.hpp"
#include "mcpeval/dataset.hpp"

namespace mcpeval {

// Exact nonnegative ratio of counts; divided only when a double is needed.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Ratio& a, const Ratio& b) {
    return static_cast<unsigned __int128>(a.num) * b.den == static_cast<unsigned __int128>(b.num) * a.den;
  }
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) {
    return static_cast<unsigned __int128>(a.num) * b.den <=> static_cast<unsigned __int128>(b.num) * a.den;
  }
};

// Mean of two ratios, reduced.
Ratio mean_of(const Ratio& a, const Ratio& b);

// The eight-cell tally of set outcomes against the true label.
//
//              positive  negative  both  empty
//   Positive     tp        fn       bp    ep
//   Negative     fp        tn       bn    en
struct McpConfusion {
  std::uint64_t tp = 0, fn = 0, bp = 0, ep = 0;
  std::uint64_t fp = 0, tn = 0, bn = 0, en = 0;

  std::uint64_t total_p() const noexcept { return tp + fn + bp + ep; }
  std::uint64_t total_n() const noexcept { return tn + fp + bn + en; }
  std::uint64_t total() const noexcept { return total_p() + total_n(); }

  friend bool operator==(const McpConfusion&, const McpConfusion&) = default;
};

struct BinaryConfusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const BinaryConfusion&, const BinaryConfusion&) = default;
};

// Sensitivity, specificity and their mean (CCR), kept as exact ratios.
struct MetricTriple {
  Ratio sensitivity_ratio;
  Ratio specificity_ratio;

  Ratio ccr_ratio() const { return mean_of(sensitivity_ratio, specificity_ratio); }
  double sensitivity() const { return sensitivity_ratio.value(); }
  double specificity() const { return specificity_ratio.value(); }
  double ccr() const { return ccr_ratio().value(); }
};

McpConfusion tally(std::span<const Label> truths, std::span<const PredictionSet> sets);

// Both and Empty count as misclassified.
MetricTriple metrics_excl(const McpConfusion& c);
// Both counts as correct (assumes the unknowable), Empty as misclassified.
MetricTriple metrics_incl(const McpConfusion& c);
// Both and Empty leave the denominators.
MetricTriple metrics_uncertain_out(const McpConfusion& c);

MetricTriple binary_metrics(const BinaryConfusion& c);

enum class ScenarioKind {
  Incl,
  Excl,
  UncertainRemoved,
  EmptyRemovedBothPositive,
  EmptyRemovedBothNegative,
  EmptyRemovedBothDominant,
};

struct ScenarioPolicy {
  ScenarioKind kind = ScenarioKind::Excl;
  // Training-set majority label; used only by EmptyRemovedBothDominant.
  Label dominant = Label::Negative;
};

// Stable identifiers used in configs and reports.
const char* to_string(ScenarioKind kind);
std::optional<ScenarioKind> parse_scenario(std::string_view name);
std::vector<ScenarioKind> all_scenarios();

struct ScenarioOutcome {
  std::uint64_t kept = 0;
  std::uint64_t total = 0;
  BinaryConfusion confusion;

  Ratio kept_fraction() const { return Ratio{kept, total}; }
};

// Collapses an eight-cell tally to a binary confusion under a policy.
ScenarioOutcome scenario_outcome(const McpConfusion& c, const ScenarioPolicy& policy);

struct ScenarioResult {
  ScenarioOutcome outcome;
  MetricTriple metrics;
};

ScenarioResult apply_scenario(std::span<const Label> truths, std::span<const PredictionSet> sets,
                              const ScenarioPolicy& policy);
ScenarioResult apply_scenario(const McpConfusion& c, const ScenarioPolicy& policy);

BinaryConfusion point_confusion(std::span<const Label> truths, std::span<const Label> predicted);
MetricTriple point_metrics(std::span<const Label> truths, std::span<const Label> predicted);

struct SetRates {
  Ratio both_rate;
  Ratio empty_rate;
  Ratio singleton_rate;
  // Fraction of each class whose set excludes the true label; an empty
  // class yields nullopt.
  std::optional<Ratio> positive_error_rate;
  std::optional<Ratio> negative_error_rate;
};

SetRates set_rates(std::span<const Label> truths, std::span<const PredictionSet> sets);
SetRates set_rates(const McpConfusion& c);

}  // namespace mcpeval
