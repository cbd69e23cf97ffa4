#include "mcpeval/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>
#include <unordered_map>

#include "mcpeval/error.hpp"
#include "mcpeval/random.hpp"
#include "text_util.hpp"

namespace mcpeval {

const char* const kMedianInterpretation =
    "per-compound median over the repeats in which the compound was in the test set "
    "(about test_fraction * repeats of them, not all repeats); metrics are then computed once "
    "from the medianised probabilities and p-values over the whole dataset";

const char* to_string(StudyKind kind) { return kind == StudyKind::Seed ? "seed" : "calibration"; }

std::optional<double> AggregateStat::dispersion() const {
  if (!dispersion_label) return std::nullopt;
  return *dispersion_label == DispersionLabel::Sd ? sd : se;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

AggregateStat aggregate(std::span<const double> values, DispersionLabel label) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "aggregate of an empty sample");
  AggregateStat s;
  s.n = values.size();
  s.dispersion_label = label;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) {
    // Identical values: report them exactly, without summation rounding.
    s.mean = *lo;
  } else {
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
  }
  s.median = median_of(std::vector<double>(values.begin(), values.end()));
  if (s.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.se = *s.sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

std::vector<NamedAggregate> aggregate_trials(const std::vector<std::vector<NamedValue>>& trials,
                                             DispersionLabel label) {
  std::vector<NamedAggregate> out;
  if (trials.empty()) return out;
  const auto& first = trials.front();
  for (std::size_t k = 0; k < first.size(); ++k) {
    NamedAggregate agg;
    agg.name = first[k].name;
    std::vector<double> values;
    values.reserve(trials.size());
    for (const auto& trial : trials) {
      if (trial.size() != first.size() || trial[k].name != agg.name) {
        throw Error(ErrorCode::InvalidArgument, "trials list different statistics");
      }
      if (trial[k].value) values.push_back(*trial[k].value);
      else ++agg.undefined_count;
    }
    if (!values.empty()) agg.stat = aggregate(values, label);
    out.push_back(std::move(agg));
  }
  return out;
}

EpsilonEvaluation evaluate_sets(std::span<const Label> truths, std::span<const PredictionSet> sets, Epsilon eps,
                                std::span<const ScenarioKind> scenarios, Label dominant) {
  EpsilonEvaluation ev{eps, tally(truths, sets), {}, {}};
  ev.rates = set_rates(ev.confusion);
  for (ScenarioKind kind : scenarios) {
    ScenarioEvaluation sc{kind, scenario_outcome(ev.confusion, ScenarioPolicy{kind, dominant}), std::nullopt, {}};
    try {
      sc.metrics = binary_metrics(sc.outcome.confusion);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MetricUndefined) throw;
      sc.undefined_reason = e.what();
    }
    ev.scenarios.push_back(std::move(sc));
  }
  return ev;
}

std::string epsilon_key(Epsilon eps) { return "eps=" + detail::format_shortest(eps.significance()); }

namespace {

void push_triple(std::vector<NamedValue>& out, const std::string& prefix, const std::optional<MetricTriple>& m) {
  out.push_back({prefix + "sensitivity", m ? std::optional(m->sensitivity()) : std::nullopt});
  out.push_back({prefix + "specificity", m ? std::optional(m->specificity()) : std::nullopt});
  out.push_back({prefix + "ccr", m ? std::optional(m->ccr()) : std::nullopt});
}

std::optional<double> ratio_value(const std::optional<Ratio>& r) {
  return r ? std::optional(r->value()) : std::nullopt;
}

}  // namespace

std::vector<NamedValue> mcp_statistics(std::span<const EpsilonEvaluation> evals) {
  std::vector<NamedValue> out;
  for (const auto& ev : evals) {
    const std::string prefix = "mcp." + epsilon_key(ev.epsilon) + ".";
    out.push_back({prefix + "both_rate", ev.rates.both_rate.value()});
    out.push_back({prefix + "empty_rate", ev.rates.empty_rate.value()});
    out.push_back({prefix + "singleton_rate", ev.rates.singleton_rate.value()});
    out.push_back({prefix + "positive_error_rate", ratio_value(ev.rates.positive_error_rate)});
    out.push_back({prefix + "negative_error_rate", ratio_value(ev.rates.negative_error_rate)});
    for (const auto& sc : ev.scenarios) {
      const std::string sp = prefix + to_string(sc.kind) + ".";
      push_triple(out, sp, sc.metrics);
      out.push_back({sp + "kept_fraction", sc.outcome.kept_fraction().value()});
    }
  }
  return out;
}

std::vector<NamedValue> repeat_statistics(const RepeatRecord& record) {
  std::vector<NamedValue> out;
  push_triple(out, "point.", record.point);
  auto mcp = mcp_statistics(record.mcp);
  out.insert(out.end(), std::make_move_iterator(mcp.begin()), std::make_move_iterator(mcp.end()));
  return out;
}

std::vector<CompoundMedian> per_compound_median(std::span<const CompoundObservation> observations,
                                                std::span<const std::string> ids) {
  struct Samples {
    Label truth = Label::Negative;
    std::vector<double> proba, p_pos, p_neg;
  };
  std::unordered_map<std::string, Samples> by_id;
  for (const auto& o : observations) {
    auto& s = by_id[o.id];
    s.truth = o.truth;
    s.proba.push_back(o.proba);
    s.p_pos.push_back(o.p.p_pos);
    s.p_neg.push_back(o.p.p_neg);
  }
  std::vector<CompoundMedian> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::InstanceNeverTested, "instance '" + id + "' never fell in a test set");
    }
    const Samples& s = it->second;
    out.push_back(CompoundMedian{id, s.truth, s.proba.size(), median_of(s.proba),
                                 PValuePair{median_of(s.p_pos), median_of(s.p_neg)}});
  }
  return out;
}

namespace {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index owns
// its output slot; on failure the lowest failing index's exception is rethrown
// so the reported error does not depend on scheduling.
template <typename Fn>
void for_each_index(std::size_t count, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
      if (errors[i]) break;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

[[noreturn]] void rethrow_for_repeat(std::size_t index, const char* what_kind) {
  try {
    throw;
  } catch (const RepeatError&) {
    throw;
  } catch (const Error& e) {
    throw RepeatError(index, e.code(), std::string(what_kind) + " " + std::to_string(index) + ": " + e.what());
  }
}

SplitSpec calibration_spec(const SplitSpec& split, std::size_t repeat) {
  SplitSpec s = split;
  s.master_seed = derive_seed(split.master_seed, "repeat", repeat);
  return s;
}

std::vector<Label> labels_of(const Dataset& ds) { return ds.labels(); }

std::vector<PredictionSet> sets_for(std::span<const InstancePrediction> preds, Epsilon eps) {
  std::vector<PredictionSet> sets;
  sets.reserve(preds.size());
  for (const auto& p : preds) sets.push_back(prediction_set(p.p, eps));
  return sets;
}

std::optional<MetricTriple> maybe_metrics(const BinaryConfusion& c) {
  try {
    return binary_metrics(c);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MetricUndefined) throw;
    return std::nullopt;
  }
}

RepeatRecord run_one_repeat(const ExperimentConfig& cfg, const Dataset& ds, std::size_t i) {
  RepeatRecord rec;
  rec.index = i;
  const Partition tt = split_train_test(ds, cfg.split, i);
  const Partition pc = split_proper_calibration(tt.first, calibration_spec(cfg.split, i), 0);
  const std::uint64_t model_seed = derive_seed(cfg.split.master_seed, "model", i);

  const PointModel point_model = cfg.model.train(tt.first, model_seed);
  const PointModel mcp_model = cfg.model.train(pc.first, model_seed);
  const CalibrationTable table = build_calibration(mcp_model, pc.second);

  rec.point_model = point_model.name();
  rec.mcp_model = mcp_model.name();
  rec.train_size = tt.first.size();
  rec.test_size = tt.second.size();
  rec.proper_size = pc.first.size();
  rec.calibration_size = pc.second.size();
  rec.dominant = tt.first.dominant_label();

  const Dataset& test = tt.second;
  const std::vector<Label> truths = labels_of(test);
  std::vector<Label> predicted;
  predicted.reserve(test.size());
  rec.predictions.reserve(test.size());
  for (const auto& inst : test.instances()) {
    InstancePrediction p;
    p.id = inst.id;
    p.truth = inst.label;
    p.point_proba = point_model.predict_proba(inst.features);
    p.mcp_proba = mcp_model.predict_proba(inst.features);
    p.p = p_values(table, p.mcp_proba);
    predicted.push_back(p.point_proba > 0.5 ? Label::Positive : Label::Negative);
    rec.predictions.push_back(std::move(p));
  }
  rec.point_confusion = point_confusion(truths, predicted);
  rec.point = maybe_metrics(rec.point_confusion);
  for (Epsilon eps : cfg.epsilons) {
    const auto sets = sets_for(rec.predictions, eps);
    rec.mcp.push_back(evaluate_sets(truths, sets, eps, cfg.scenarios, rec.dominant));
  }
  return rec;
}

MedianResult median_result(const ExperimentConfig& cfg, const Dataset& ds, const std::vector<RepeatRecord>& repeats) {
  std::vector<CompoundObservation> obs;
  for (const auto& r : repeats) {
    for (const auto& p : r.predictions) obs.push_back({p.id, p.truth, p.point_proba, p.p});
  }
  std::vector<std::string> ids;
  ids.reserve(ds.size());
  for (const auto& inst : ds.instances()) ids.push_back(inst.id);

  MedianResult m;
  m.compounds = per_compound_median(obs, ids);
  m.dominant = ds.dominant_label();
  std::vector<Label> truths, predicted;
  for (const auto& c : m.compounds) {
    truths.push_back(c.truth);
    predicted.push_back(c.proba > 0.5 ? Label::Positive : Label::Negative);
  }
  m.point_confusion = point_confusion(truths, predicted);
  m.point = maybe_metrics(m.point_confusion);
  for (Epsilon eps : cfg.epsilons) {
    std::vector<PredictionSet> sets;
    for (const auto& c : m.compounds) sets.push_back(prediction_set(c.p, eps));
    m.mcp.push_back(evaluate_sets(truths, sets, eps, cfg.scenarios, m.dominant));
  }
  return m;
}

}  // namespace

ExperimentResult run_repeated_split(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  return run_repeated_split(config, config.data.load(), options);
}

ExperimentResult run_repeated_split(const ExperimentConfig& config, const Dataset& data, const RunOptions& options) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  result.repeats.resize(config.split.repeats);
  for_each_index(config.split.repeats, options.threads, [&](std::size_t i) {
    try {
      result.repeats[i] = run_one_repeat(config, data, i);
    } catch (const Error&) {
      rethrow_for_repeat(i, "repeat");
    }
  });

  std::vector<std::vector<NamedValue>> trials;
  trials.reserve(result.repeats.size());
  for (const auto& r : result.repeats) trials.push_back(repeat_statistics(r));
  result.aggregates = aggregate_trials(trials, config.dispersion);
  if (config.aggregation == AggregationMode::PerCompoundMedian) {
    result.median = median_result(config, data, result.repeats);
  }
  return result;
}

namespace {

struct FixedPartition {
  Dataset train;
  Dataset test;
  SplitSpec calibration;
};

FixedPartition fixed_partition(const ExperimentConfig& cfg, const Dataset& ds) {
  Partition tt = split_train_test(ds, cfg.split, 0);
  return FixedPartition{std::move(tt.first), std::move(tt.second), calibration_spec(cfg.split, 0)};
}

std::vector<NamedValue> evaluate_mcp_trial(const ExperimentConfig& cfg, const PointModel& model,
                                           const Dataset& calibration, const Dataset& test, Label dominant) {
  const CalibrationTable table = build_calibration(model, calibration);
  std::vector<InstancePrediction> preds;
  preds.reserve(test.size());
  for (const auto& inst : test.instances()) {
    InstancePrediction p;
    p.truth = inst.label;
    p.mcp_proba = model.predict_proba(inst.features);
    p.p = p_values(table, p.mcp_proba);
    preds.push_back(std::move(p));
  }
  const auto truths = test.labels();
  std::vector<EpsilonEvaluation> evals;
  for (Epsilon eps : cfg.epsilons) evals.push_back(evaluate_sets(truths, sets_for(preds, eps), eps, cfg.scenarios, dominant));
  return mcp_statistics(evals);
}

}  // namespace

VariabilityResult run_seed_variability(const ExperimentConfig& config, std::size_t n_seeds, const RunOptions& options) {
  config.validate();
  return run_seed_variability(config, config.data.load(), n_seeds, options);
}

VariabilityResult run_seed_variability(const ExperimentConfig& config, const Dataset& data, std::size_t n_seeds,
                                       const RunOptions& options) {
  config.validate();
  if (n_seeds < 2) throw Error(ErrorCode::ConfigError, "--count: seed variability needs at least 2 seeds");
  const FixedPartition part = fixed_partition(config, data);
  const Partition pc = split_proper_calibration(part.train, part.calibration, 0);
  const Label dominant = part.train.dominant_label();

  VariabilityResult result;
  result.kind = StudyKind::Seed;
  result.config = config;
  result.train_size = part.train.size();
  result.test_size = part.test.size();
  result.trials.resize(n_seeds);
  std::vector<std::vector<double>> probas(n_seeds);

  for_each_index(n_seeds, options.threads, [&](std::size_t s) {
    try {
      const std::uint64_t seed = derive_seed(config.split.master_seed, "seed_study", s);
      const PointModel point_model = config.model.train(part.train, seed);
      const PointModel mcp_model = config.model.train(pc.first, seed);
      VariabilityTrial trial;
      trial.index = s;
      trial.model = point_model.name();
      std::vector<Label> predicted;
      for (const auto& inst : part.test.instances()) {
        const double p = point_model.predict_proba(inst.features);
        probas[s].push_back(p);
        predicted.push_back(p > 0.5 ? Label::Positive : Label::Negative);
      }
      push_triple(trial.values, "point.", maybe_metrics(point_confusion(part.test.labels(), predicted)));
      auto mcp = evaluate_mcp_trial(config, mcp_model, pc.second, part.test, dominant);
      trial.values.insert(trial.values.end(), mcp.begin(), mcp.end());
      result.trials[s] = std::move(trial);
    } catch (const Error&) {
      rethrow_for_repeat(s, "seed");
    }
  });

  std::size_t flips = 0;
  double max_spread = 0.0;
  for (std::size_t i = 0; i < part.test.size(); ++i) {
    InstanceSpread sp;
    sp.id = part.test[i].id;
    sp.truth = part.test[i].label;
    sp.min_proba = sp.max_proba = probas[0][i];
    double sum = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      sp.min_proba = std::min(sp.min_proba, probas[s][i]);
      sp.max_proba = std::max(sp.max_proba, probas[s][i]);
      sum += probas[s][i];
    }
    sp.mean_proba = sp.min_proba == sp.max_proba ? sp.min_proba : sum / static_cast<double>(n_seeds);
    sp.label_flipped = (sp.min_proba > 0.5) != (sp.max_proba > 0.5);
    flips += sp.label_flipped;
    max_spread = std::max(max_spread, sp.max_proba - sp.min_proba);
    result.instances.push_back(std::move(sp));
  }
  result.label_flips = flips;
  result.max_proba_spread = max_spread;

  std::vector<std::vector<NamedValue>> values;
  for (const auto& t : result.trials) values.push_back(t.values);
  result.aggregates = aggregate_trials(values, config.dispersion);
  return result;
}

VariabilityResult run_calibration_variability(const ExperimentConfig& config, std::size_t n_resamples,
                                              const RunOptions& options) {
  config.validate();
  return run_calibration_variability(config, config.data.load(), n_resamples, options);
}

VariabilityResult run_calibration_variability(const ExperimentConfig& config, const Dataset& data,
                                              std::size_t n_resamples, const RunOptions& options) {
  config.validate();
  if (n_resamples < 2) {
    throw Error(ErrorCode::ConfigError, "--count: calibration variability needs at least 2 resamples");
  }
  const FixedPartition part = fixed_partition(config, data);
  const std::uint64_t model_seed = derive_seed(config.split.master_seed, "model", 0);
  const Label dominant = part.train.dominant_label();

  VariabilityResult result;
  result.kind = StudyKind::Calibration;
  result.config = config;
  result.train_size = part.train.size();
  result.test_size = part.test.size();
  result.trials.resize(n_resamples);
  for_each_index(n_resamples, options.threads, [&](std::size_t r) {
    try {
      const Partition pc = split_proper_calibration(part.train, part.calibration, r);
      const PointModel model = config.model.train(pc.first, model_seed);
      VariabilityTrial trial;
      trial.index = r;
      trial.model = model.name();
      trial.values = evaluate_mcp_trial(config, model, pc.second, part.test, dominant);
      result.trials[r] = std::move(trial);
    } catch (const Error&) {
      rethrow_for_repeat(r, "resample");
    }
  });

  std::vector<std::vector<NamedValue>> values;
  for (const auto& t : result.trials) values.push_back(t.values);
  result.aggregates = aggregate_trials(values, config.dispersion);
  return result;
}

}  // namespace mcpeval
