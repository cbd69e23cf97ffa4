#include "mcpeval/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mcpeval/error.hpp"
#include "text_util.hpp"

namespace mcpeval {

const char* const kToolName = "mcpeval";
const char* const kToolVersion = "1.0.0";
const char* const kPValueConvention =
    "non-smoothed Mondrian p-value: p_c = (#{calibration scores of class c >= candidate score} + 1) / (n_c + 1), "
    "nonconformity = 1 - predicted probability of the candidate class, ties count toward the numerator";
const char* const kInclusionRule = "class c is in the prediction set iff p_c > significance (strict)";
const char* const kThresholdRule = "point label is active iff predicted probability > 0.5; exactly 0.5 is inactive";
const char* const kInclCaveat =
    "_incl metrics assume every 'both' prediction is counted as correctly classified, which cannot be known "
    "when predicting";
const char* const kEmptyNote =
    "'empty' predictions count as errors in _incl, _excl and validity accounting; uncertain_out and "
    "empty_out_* scenarios drop them and report kept_fraction";
const char* const kSeedDerivation =
    "derive_seed(master, path) = SplitMix64/FNV-1a chain; split ('split', i), calibration "
    "(('repeat', i), ('calibration', 0)), model ('model', i), seed study ('seed_study', s)";

std::string dispersion_definition(DispersionLabel label) {
  return label == DispersionLabel::Sd
             ? "sd = sample standard deviation (n - 1 denominator) across trials; n = trials with a defined value"
             : "se = sd / sqrt(n), sd with n - 1 denominator; n = trials with a defined value";
}

Json aggregate_json(const NamedAggregate& agg) {
  Json j;
  j["statistic"] = agg.name;
  if (!agg.stat) {
    j["value"] = "undefined (n=0)";
    j["n"] = 0;
    j["undefined_count"] = agg.undefined_count;
    return j;
  }
  const AggregateStat& s = *agg.stat;
  if (!s.dispersion_label || s.n == 0) {
    throw Error(ErrorCode::ReportError, "statistic '" + agg.name + "' has no dispersion label or sample size");
  }
  j["value"] = s.mean;
  j["median"] = s.median;
  if (auto d = s.dispersion()) {
    j["dispersion"] = *d;
  } else {
    j["dispersion"] = "undefined";
  }
  j["dispersion_label"] = to_string(*s.dispersion_label);
  j["n"] = s.n;
  j["undefined_count"] = agg.undefined_count;
  return j;
}

void check_dispersion_labels(const Json& doc) {
  if (doc.is_object()) {
    if (doc.contains("dispersion")) {
      const bool labeled = doc.contains("dispersion_label") && doc["dispersion_label"].is_string() &&
                           !doc["dispersion_label"].get<std::string>().empty();
      const bool sized = doc.contains("n") && doc["n"].is_number_integer() && doc["n"].get<std::int64_t>() > 0;
      if (!labeled || !sized) {
        throw Error(ErrorCode::ReportError, "dispersion value without dispersion_label and n: " + doc.dump());
      }
    }
    for (const auto& [key, value] : doc.items()) check_dispersion_labels(value);
  } else if (doc.is_array()) {
    for (const auto& value : doc) check_dispersion_labels(value);
  }
}

std::string format_plus_minus(const NamedAggregate& agg, int decimals) {
  if (!agg.stat) return "undefined (n=0)";
  const AggregateStat& s = *agg.stat;
  if (!s.dispersion_label || s.n == 0) {
    throw Error(ErrorCode::ReportError, "statistic '" + agg.name + "' has no dispersion label or sample size");
  }
  const std::string label = to_string(*s.dispersion_label);
  const std::string n = std::to_string(s.n);
  if (auto d = s.dispersion()) {
    return detail::format_fixed(s.mean, decimals) + " ± " + detail::format_fixed(*d, decimals) + " " + label +
           " (n=" + n + ")";
  }
  return detail::format_fixed(s.mean, decimals) + " (" + label + " undefined, n=" + n + ")";
}

namespace {

Json ratio_json(const Ratio& r) { return Json::array({r.num, r.den}); }

Json mcp_confusion_json(const McpConfusion& c) {
  Json j;
  j["tp"] = c.tp;
  j["fn"] = c.fn;
  j["bp"] = c.bp;
  j["ep"] = c.ep;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["bn"] = c.bn;
  j["en"] = c.en;
  return j;
}

Json binary_confusion_json(const BinaryConfusion& c) {
  Json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  return j;
}

Json optional_ratio_json(const std::optional<Ratio>& r) {
  return r ? Json(r->value()) : Json("undefined (n=0)");
}

bool has_incl(const ExperimentConfig& cfg) {
  return std::find(cfg.scenarios.begin(), cfg.scenarios.end(), ScenarioKind::Incl) != cfg.scenarios.end();
}

Json config_echo_json(const ExperimentConfig& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : cfg.echo()) j[k] = v;
  return j;
}

Json metadata_json(const ExperimentConfig& cfg) {
  Json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["model"] = cfg.model.describe();
  m["model_kind"] = to_string(cfg.model.kind);
  m["seed"] = cfg.split.master_seed;
  m["seed_derivation"] = kSeedDerivation;
  m["p_value_convention"] = kPValueConvention;
  m["set_inclusion_rule"] = kInclusionRule;
  m["point_threshold_rule"] = kThresholdRule;
  m["aggregation_mode"] = to_string(cfg.aggregation);
  m["aggregation_interpretation"] =
      cfg.aggregation == AggregationMode::PerRepeat
          ? std::string("statistics computed per repeat, then summarised across repeats")
          : std::string(kMedianInterpretation);
  m["dispersion_definition"] = dispersion_definition(cfg.dispersion);
  m["empty_note"] = kEmptyNote;
  if (has_incl(cfg)) m["incl_caveat"] = kInclCaveat;
  m["config"] = config_echo_json(cfg);
  return m;
}

Json aggregates_json(const std::vector<NamedAggregate>& aggs) {
  Json a = Json::array();
  for (const auto& agg : aggs) a.push_back(aggregate_json(agg));
  return a;
}

}  // namespace

Json metric_triple_json(const std::optional<MetricTriple>& m, std::string_view undefined_reason) {
  Json j;
  if (!m) {
    j["sensitivity"] = j["specificity"] = j["ccr"] = "undefined (n=0)";
    if (!undefined_reason.empty()) j["reason"] = undefined_reason;
    return j;
  }
  j["sensitivity"] = m->sensitivity();
  j["specificity"] = m->specificity();
  j["ccr"] = m->ccr();
  j["sensitivity_ratio"] = ratio_json(m->sensitivity_ratio);
  j["specificity_ratio"] = ratio_json(m->specificity_ratio);
  j["ccr_ratio"] = ratio_json(m->ccr_ratio());
  return j;
}

Json epsilon_evaluation_json(const EpsilonEvaluation& ev) {
  Json j;
  j["epsilon"] = ev.epsilon.significance();
  j["confidence"] = ev.epsilon.confidence();
  j["confusion"] = mcp_confusion_json(ev.confusion);
  Json rates;
  rates["both_rate"] = ev.rates.both_rate.value();
  rates["empty_rate"] = ev.rates.empty_rate.value();
  rates["singleton_rate"] = ev.rates.singleton_rate.value();
  rates["positive_error_rate"] = optional_ratio_json(ev.rates.positive_error_rate);
  rates["negative_error_rate"] = optional_ratio_json(ev.rates.negative_error_rate);
  j["set_rates"] = std::move(rates);
  Json scenarios = Json::array();
  for (const auto& sc : ev.scenarios) {
    Json s;
    s["scenario"] = to_string(sc.kind);
    s["kept"] = sc.outcome.kept;
    s["total"] = sc.outcome.total;
    s["kept_fraction"] = sc.outcome.kept_fraction().value();
    s["confusion"] = binary_confusion_json(sc.outcome.confusion);
    Json m = metric_triple_json(sc.metrics, sc.undefined_reason);
    for (auto& [k, v] : m.items()) s[k] = v;
    scenarios.push_back(std::move(s));
  }
  j["scenarios"] = std::move(scenarios);
  return j;
}

Json report_json(const ExperimentResult& result) {
  const ExperimentConfig& cfg = result.config;
  Json doc;
  doc["metadata"] = metadata_json(cfg);
  doc["metadata"]["kind"] = "repeated_split";

  Json repeats = Json::array();
  for (const auto& r : result.repeats) {
    Json j;
    j["index"] = r.index;
    j["point_model"] = r.point_model;
    j["mcp_model"] = r.mcp_model;
    j["sizes"] = {{"train", r.train_size},
                  {"test", r.test_size},
                  {"proper", r.proper_size},
                  {"calibration", r.calibration_size}};
    j["train_dominant"] = to_string(r.dominant);
    Json point = metric_triple_json(r.point);
    point["confusion"] = binary_confusion_json(r.point_confusion);
    j["point"] = std::move(point);
    Json mcp = Json::array();
    for (const auto& ev : r.mcp) mcp.push_back(epsilon_evaluation_json(ev));
    j["mcp"] = std::move(mcp);
    repeats.push_back(std::move(j));
  }
  doc["repeats"] = std::move(repeats);
  doc["aggregates"] = aggregates_json(result.aggregates);

  if (result.median) {
    const MedianResult& m = *result.median;
    Json j;
    j["interpretation"] = kMedianInterpretation;
    j["dominant"] = to_string(m.dominant);
    Json point = metric_triple_json(m.point);
    point["confusion"] = binary_confusion_json(m.point_confusion);
    j["point"] = std::move(point);
    Json mcp = Json::array();
    for (const auto& ev : m.mcp) mcp.push_back(epsilon_evaluation_json(ev));
    j["mcp"] = std::move(mcp);
    Json compounds = Json::array();
    for (const auto& c : m.compounds) {
      compounds.push_back({{"id", c.id},
                           {"true_label", to_string(c.truth)},
                           {"times_tested", c.times_tested},
                           {"median_proba", c.proba},
                           {"median_p_pos", c.p.p_pos},
                           {"median_p_neg", c.p.p_neg}});
    }
    j["compounds"] = std::move(compounds);
    doc["per_compound_median"] = std::move(j);
  }
  return doc;
}

Json variability_json(const VariabilityResult& result) {
  Json doc;
  doc["metadata"] = metadata_json(result.config);
  doc["metadata"]["kind"] = std::string(to_string(result.kind)) + "_variability";
  doc["metadata"]["study"] =
      result.kind == StudyKind::Seed
          ? "one fixed train/test/calibration partition (repeat 0); model retrained with seeds "
            "derive_seed(master, ('seed_study', s))"
          : "one fixed train/test split (repeat 0) and model seed derive_seed(master, ('model', 0)); "
            "proper/calibration split redrawn with resample indices 0..n-1";
  doc["sizes"] = {{"train", result.train_size}, {"test", result.test_size}};
  doc["trial_count"] = result.trials.size();
  Json trials = Json::array();
  for (const auto& t : result.trials) {
    Json j;
    j["index"] = t.index;
    j["model"] = t.model;
    Json values = Json::object();
    for (const auto& v : t.values) values[v.name] = v.value ? Json(*v.value) : Json("undefined (n=0)");
    j["values"] = std::move(values);
    trials.push_back(std::move(j));
  }
  doc["trials"] = std::move(trials);
  doc["aggregates"] = aggregates_json(result.aggregates);
  if (result.label_flips) {
    doc["label_flips"] = *result.label_flips;
    doc["max_proba_spread"] = result.max_proba_spread.value_or(0.0);
    Json flipped = Json::array();
    for (const auto& s : result.instances) {
      if (!s.label_flipped) continue;
      flipped.push_back({{"id", s.id},
                         {"true_label", to_string(s.truth)},
                         {"mean_proba", s.mean_proba},
                         {"min_proba", s.min_proba},
                         {"max_proba", s.max_proba}});
    }
    doc["flipped_instances"] = std::move(flipped);
  }
  return doc;
}

std::string serialize(const Json& doc) {
  check_dispersion_labels(doc);
  return doc.dump(2) + "\n";
}

PredictionDump prediction_dump(const ExperimentResult& result) {
  PredictionDump dump;
  dump.epsilons = result.config.epsilons;
  for (const auto& r : result.repeats) {
    for (const auto& p : r.predictions) {
      PredictionRecord rec;
      rec.repeat = r.index;
      rec.id = p.id;
      rec.truth = p.truth;
      rec.proba_pos = p.mcp_proba;
      rec.p = p.p;
      rec.train_dominant = r.dominant;
      for (Epsilon eps : dump.epsilons) rec.sets.push_back(prediction_set(p.p, eps));
      dump.records.push_back(std::move(rec));
    }
  }
  return dump;
}

namespace {

const NamedAggregate* find_aggregate(const std::vector<NamedAggregate>& aggs, const std::string& name) {
  for (const auto& a : aggs) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void csv_stat(std::string& row, const NamedAggregate* agg) {
  if (!agg || !agg->stat) {
    row += ",undefined,,0";
    return;
  }
  const auto d = agg->stat->dispersion();
  row += "," + detail::format_double(agg->stat->mean) + "," + (d ? detail::format_double(*d) : "undefined") + "," +
         std::to_string(agg->stat->n);
}

}  // namespace

std::string metrics_csv(std::string_view experiment, const ExperimentConfig& config,
                        const std::vector<NamedAggregate>& aggregates) {
  static const char* const kColumns[] = {"sensitivity", "specificity", "ccr", "kept_fraction", "both_rate",
                                         "empty_rate"};
  std::string out = "experiment,epsilon,confidence,scenario,dispersion_label";
  for (const char* c : kColumns) out += std::string(",") + c + "," + c + "_dispersion," + c + "_n";
  out += '\n';
  for (Epsilon eps : config.epsilons) {
    const std::string prefix = "mcp." + epsilon_key(eps) + ".";
    for (ScenarioKind kind : config.scenarios) {
      std::string row = std::string(experiment) + "," + detail::format_shortest(eps.significance()) + "," +
                        detail::format_shortest(eps.confidence()) + "," + to_string(kind) + "," +
                        to_string(config.dispersion);
      const std::string sp = prefix + to_string(kind) + ".";
      csv_stat(row, find_aggregate(aggregates, sp + "sensitivity"));
      csv_stat(row, find_aggregate(aggregates, sp + "specificity"));
      csv_stat(row, find_aggregate(aggregates, sp + "ccr"));
      csv_stat(row, find_aggregate(aggregates, sp + "kept_fraction"));
      csv_stat(row, find_aggregate(aggregates, prefix + "both_rate"));
      csv_stat(row, find_aggregate(aggregates, prefix + "empty_rate"));
      out += row + '\n';
    }
  }
  return out;
}

std::string variability_trials_csv(const VariabilityResult& result) {
  std::string out = "trial,model";
  if (!result.trials.empty()) {
    for (const auto& v : result.trials.front().values) out += "," + v.name;
  }
  out += '\n';
  for (const auto& t : result.trials) {
    out += std::to_string(t.index) + ",\"" + t.model + "\"";
    for (const auto& v : t.values) out += "," + (v.value ? detail::format_double(*v.value) : std::string("undefined"));
    out += '\n';
  }
  return out;
}

namespace {

// Left-aligned columns separated by two spaces.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  auto display_width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;  // count UTF-8 code points
    return w;
  };
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], display_width(r[c]));
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += r[c];
      if (c + 1 < r.size()) line += std::string(width[c] - display_width(r[c]) + 2, ' ');
    }
    out += line + '\n';
  }
  return out;
}

std::string confidence_label(Epsilon eps) {
  return detail::format_shortest(eps.confidence() * 100.0) + "%";
}

void mcp_rows(std::vector<std::vector<std::string>>& rows, const ExperimentConfig& cfg,
              const std::vector<NamedAggregate>& aggs) {
  rows.push_back({"confidence", "scenario", "sensitivity", "specificity", "ccr", "kept_fraction"});
  for (Epsilon eps : cfg.epsilons) {
    const std::string prefix = "mcp." + epsilon_key(eps) + ".";
    for (ScenarioKind kind : cfg.scenarios) {
      const std::string sp = prefix + to_string(kind) + ".";
      std::vector<std::string> row{confidence_label(eps), to_string(kind)};
      for (const char* m : {"sensitivity", "specificity", "ccr", "kept_fraction"}) {
        const NamedAggregate* a = find_aggregate(aggs, sp + m);
        row.push_back(a ? format_plus_minus(*a) : "-");
      }
      rows.push_back(std::move(row));
    }
  }
}

void rate_rows(std::vector<std::vector<std::string>>& rows, const ExperimentConfig& cfg,
               const std::vector<NamedAggregate>& aggs) {
  rows.push_back({"confidence", "both_rate", "empty_rate", "active_error", "inactive_error"});
  for (Epsilon eps : cfg.epsilons) {
    const std::string prefix = "mcp." + epsilon_key(eps) + ".";
    std::vector<std::string> row{confidence_label(eps)};
    for (const char* m : {"both_rate", "empty_rate", "positive_error_rate", "negative_error_rate"}) {
      const NamedAggregate* a = find_aggregate(aggs, prefix + m);
      row.push_back(a ? format_plus_minus(*a) : "-");
    }
    rows.push_back(std::move(row));
  }
}

void point_rows(std::vector<std::vector<std::string>>& rows, const std::vector<NamedAggregate>& aggs) {
  rows.push_back({"sensitivity", "specificity", "ccr"});
  std::vector<std::string> row;
  for (const char* m : {"point.sensitivity", "point.specificity", "point.ccr"}) {
    const NamedAggregate* a = find_aggregate(aggs, m);
    row.push_back(a ? format_plus_minus(*a) : "-");
  }
  rows.push_back(std::move(row));
}

}  // namespace

std::string summary_table(const ExperimentResult& result) {
  const ExperimentConfig& cfg = result.config;
  std::ostringstream out;
  const std::string model = cfg.model.describe();
  out << "model: " << model << " (seed " << cfg.split.master_seed << ", per-repeat seeds derived)\n";
  out << "repeats: " << cfg.split.repeats << ", test fraction " << detail::format_shortest(cfg.split.test_fraction)
      << ", calibration fraction " << detail::format_shortest(cfg.split.calibration_fraction)
      << (cfg.split.stratified ? ", stratified" : ", not stratified") << "\n";
  out << "dispersion: " << dispersion_definition(cfg.dispersion) << "\n\n";

  out << "Point classifier " << model << ", threshold 0.5\n";
  std::vector<std::vector<std::string>> rows;
  point_rows(rows, result.aggregates);
  out << render_table(rows) << "\n";

  out << "Mondrian conformal predictor on " << model << "\n";
  rows.clear();
  mcp_rows(rows, cfg, result.aggregates);
  out << render_table(rows) << "\n";

  out << "Prediction-set rates\n";
  rows.clear();
  rate_rows(rows, cfg, result.aggregates);
  out << render_table(rows);

  if (result.median) {
    const MedianResult& m = *result.median;
    out << "\nPer-compound median (" << m.compounds.size() << " compounds)\n";
    std::vector<std::vector<std::string>> mr{{"path", "confidence", "scenario", "sensitivity", "specificity", "ccr"}};
    auto fmt = [](const std::optional<MetricTriple>& t, double (MetricTriple::*f)() const) {
      return t ? detail::format_fixed(((*t).*f)(), 4) : std::string("undefined (n=0)");
    };
    mr.push_back({"point", "-", "-", fmt(m.point, &MetricTriple::sensitivity), fmt(m.point, &MetricTriple::specificity),
                  fmt(m.point, &MetricTriple::ccr)});
    for (const auto& ev : m.mcp) {
      for (const auto& sc : ev.scenarios) {
        mr.push_back({"mcp", confidence_label(ev.epsilon), to_string(sc.kind),
                      fmt(sc.metrics, &MetricTriple::sensitivity), fmt(sc.metrics, &MetricTriple::specificity),
                      fmt(sc.metrics, &MetricTriple::ccr)});
      }
    }
    out << render_table(mr);
  }

  out << "\nnote: " << kEmptyNote << "\n";
  if (has_incl(cfg)) out << "note: " << kInclCaveat << "\n";
  return out.str();
}

std::string variability_table(const VariabilityResult& result) {
  const ExperimentConfig& cfg = result.config;
  std::ostringstream out;
  out << to_string(result.kind) << " variability over " << result.trials.size() << " trials, model "
      << cfg.model.describe() << "\n";
  out << "dispersion: " << dispersion_definition(cfg.dispersion) << "\n\n";
  std::vector<std::vector<std::string>> rows;
  if (result.kind == StudyKind::Seed) {
    out << "Point classifier\n";
    point_rows(rows, result.aggregates);
    out << render_table(rows) << "\n";
    rows.clear();
  }
  out << "Mondrian conformal predictor\n";
  mcp_rows(rows, cfg, result.aggregates);
  out << render_table(rows) << "\n";
  rows.clear();
  out << "Prediction-set rates\n";
  rate_rows(rows, cfg, result.aggregates);
  out << render_table(rows);
  if (result.label_flips) {
    out << "\npoint-label flips across seeds: " << *result.label_flips << " of " << result.test_size
        << " test instances; max probability spread " << detail::format_fixed(result.max_proba_spread.value_or(0.0), 4)
        << "\n";
  }
  if (has_incl(cfg)) out << "\nnote: " << kInclCaveat << "\n";
  return out.str();
}

std::string confusion_table(const McpConfusion& c) {
  std::vector<std::vector<std::string>> rows{
      {"actual \\ prediction", "positive", "negative", "both", "empty", "total"},
      {"positive", std::to_string(c.tp), std::to_string(c.fn), std::to_string(c.bp), std::to_string(c.ep),
       std::to_string(c.total_p())},
      {"negative", std::to_string(c.fp), std::to_string(c.tn), std::to_string(c.bn), std::to_string(c.en),
       std::to_string(c.total_n())},
  };
  return render_table(rows);
}

void write_report(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  detail::write_file_atomic(path, contents);
}

}  // namespace mcpeval
