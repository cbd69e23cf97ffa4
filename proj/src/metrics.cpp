#include "mcpeval/metrics.hpp"

#include <numeric>

#include "mcpeval/error.hpp"

namespace mcpeval {

Ratio mean_of(const Ratio& a, const Ratio& b) {
  const unsigned __int128 num = static_cast<unsigned __int128>(a.num) * b.den +
                                static_cast<unsigned __int128>(b.num) * a.den;
  const unsigned __int128 den = static_cast<unsigned __int128>(a.den) * b.den * 2;
  unsigned __int128 x = num, y = den;
  while (y != 0) {
    const unsigned __int128 t = x % y;
    x = y;
    y = t;
  }
  const unsigned __int128 g = x == 0 ? 1 : x;
  return Ratio{static_cast<std::uint64_t>(num / g), static_cast<std::uint64_t>(den / g)};
}

namespace {

Ratio checked_ratio(std::uint64_t num, std::uint64_t den, const char* which) {
  if (den == 0) {
    throw Error(ErrorCode::MetricUndefined, std::string("metric undefined: ") + which + " is zero");
  }
  return Ratio{num, den};
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch,
                "truths and predictions differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw Error(ErrorCode::EmptyInput, "no instances to evaluate");
}

}  // namespace

McpConfusion tally(std::span<const Label> truths, std::span<const PredictionSet> sets) {
  check_lengths(truths.size(), sets.size());
  McpConfusion c;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool positive = truths[i] == Label::Positive;
    switch (sets[i]) {
      case PredictionSet::PositiveOnly: ++(positive ? c.tp : c.fp); break;
      case PredictionSet::NegativeOnly: ++(positive ? c.fn : c.tn); break;
      case PredictionSet::Both: ++(positive ? c.bp : c.bn); break;
      case PredictionSet::Empty: ++(positive ? c.ep : c.en); break;
    }
  }
  return c;
}

MetricTriple metrics_excl(const McpConfusion& c) {
  return {checked_ratio(c.tp, c.total_p(), "TOTAL_P"), checked_ratio(c.tn, c.total_n(), "TOTAL_N")};
}

MetricTriple metrics_incl(const McpConfusion& c) {
  return {checked_ratio(c.tp + c.bp, c.total_p(), "TOTAL_P"), checked_ratio(c.tn + c.bn, c.total_n(), "TOTAL_N")};
}

MetricTriple metrics_uncertain_out(const McpConfusion& c) {
  return {checked_ratio(c.tp, c.tp + c.fn, "TP + FN"), checked_ratio(c.tn, c.tn + c.fp, "TN + FP")};
}

MetricTriple binary_metrics(const BinaryConfusion& c) {
  return {checked_ratio(c.tp, c.tp + c.fn, "TP + FN"), checked_ratio(c.tn, c.tn + c.fp, "TN + FP")};
}

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Incl: return "incl";
    case ScenarioKind::Excl: return "excl";
    case ScenarioKind::UncertainRemoved: return "uncertain_out";
    case ScenarioKind::EmptyRemovedBothPositive: return "empty_out_both_positive";
    case ScenarioKind::EmptyRemovedBothNegative: return "empty_out_both_negative";
    case ScenarioKind::EmptyRemovedBothDominant: return "empty_out_both_dominant";
  }
  return "excl";
}

std::optional<ScenarioKind> parse_scenario(std::string_view name) {
  for (ScenarioKind k : all_scenarios()) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::vector<ScenarioKind> all_scenarios() {
  return {ScenarioKind::Incl,
          ScenarioKind::Excl,
          ScenarioKind::UncertainRemoved,
          ScenarioKind::EmptyRemovedBothPositive,
          ScenarioKind::EmptyRemovedBothNegative,
          ScenarioKind::EmptyRemovedBothDominant};
}

ScenarioOutcome scenario_outcome(const McpConfusion& c, const ScenarioPolicy& policy) {
  ScenarioOutcome out;
  out.total = c.total();
  BinaryConfusion& b = out.confusion;
  switch (policy.kind) {
    case ScenarioKind::Excl:
      b = {c.tp, c.fp + c.bn + c.en, c.tn, c.fn + c.bp + c.ep};
      break;
    case ScenarioKind::Incl:
      b = {c.tp + c.bp, c.fp + c.en, c.tn + c.bn, c.fn + c.ep};
      break;
    case ScenarioKind::UncertainRemoved:
      b = {c.tp, c.fp, c.tn, c.fn};
      break;
    case ScenarioKind::EmptyRemovedBothPositive:
    case ScenarioKind::EmptyRemovedBothNegative:
    case ScenarioKind::EmptyRemovedBothDominant: {
      Label both_as = Label::Positive;
      if (policy.kind == ScenarioKind::EmptyRemovedBothNegative) both_as = Label::Negative;
      if (policy.kind == ScenarioKind::EmptyRemovedBothDominant) both_as = policy.dominant;
      if (both_as == Label::Positive) {
        b = {c.tp + c.bp, c.fp + c.bn, c.tn, c.fn};
      } else {
        b = {c.tp, c.fp, c.tn + c.bn, c.fn + c.bp};
      }
      break;
    }
  }
  out.kept = b.total();
  return out;
}

ScenarioResult apply_scenario(const McpConfusion& c, const ScenarioPolicy& policy) {
  ScenarioResult r;
  r.outcome = scenario_outcome(c, policy);
  r.metrics = binary_metrics(r.outcome.confusion);
  return r;
}

ScenarioResult apply_scenario(std::span<const Label> truths, std::span<const PredictionSet> sets,
                              const ScenarioPolicy& policy) {
  return apply_scenario(tally(truths, sets), policy);
}

BinaryConfusion point_confusion(std::span<const Label> truths, std::span<const Label> predicted) {
  check_lengths(truths.size(), predicted.size());
  BinaryConfusion c;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool truth = truths[i] == Label::Positive;
    const bool pred = predicted[i] == Label::Positive;
    if (truth) ++(pred ? c.tp : c.fn);
    else ++(pred ? c.fp : c.tn);
  }
  return c;
}

MetricTriple point_metrics(std::span<const Label> truths, std::span<const Label> predicted) {
  return binary_metrics(point_confusion(truths, predicted));
}

SetRates set_rates(const McpConfusion& c) {
  const std::uint64_t n = c.total();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "no instances to evaluate");
  SetRates r;
  r.both_rate = Ratio{c.bp + c.bn, n};
  r.empty_rate = Ratio{c.ep + c.en, n};
  r.singleton_rate = Ratio{c.tp + c.fn + c.fp + c.tn, n};
  if (c.total_p() > 0) r.positive_error_rate = Ratio{c.fn + c.ep, c.total_p()};
  if (c.total_n() > 0) r.negative_error_rate = Ratio{c.fp + c.en, c.total_n()};
  return r;
}

SetRates set_rates(std::span<const Label> truths, std::span<const PredictionSet> sets) {
  return set_rates(tally(truths, sets));
}

}  // namespace mcpeval
