#include "mcpeval/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "mcpeval/error.hpp"
#include "mcpeval/report.hpp"
#include "text_util.hpp"

namespace mcpeval {

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  bool quiet = false;
};

std::filesystem::path sibling(const std::filesystem::path& report, const std::string& suffix) {
  std::filesystem::path p = report;
  p.replace_extension();
  p += suffix;
  return p;
}

bool is_config_error(ErrorCode code) {
  return code == ErrorCode::ConfigError || code == ErrorCode::InvalidArgument;
}

int report_error(std::ostream& err, const Error& e, int default_code) {
  err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
  return is_config_error(e.code()) ? kExitUsage : default_code;
}

ExperimentConfig read_config(const GlobalOptions& g) {
  if (g.config.empty()) throw Error(ErrorCode::ConfigError, "--config: a configuration file is required");
  try {
    return load_config(g.config);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw Error(ErrorCode::ConfigError, std::string("--config: ") + e.what());
    throw;
  }
}

int cmd_run(const GlobalOptions& g, std::size_t threads, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = read_config(g);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const ExperimentResult result = run_repeated_split(cfg, RunOptions{threads});
    const std::filesystem::path report =
        !g.out.empty() ? std::filesystem::path(g.out) : cfg.output.value_or("mcpeval_report.json");
    write_report(report, serialize(report_json(result)));
    write_report(sibling(report, ".predictions.csv"), format_prediction_dump(prediction_dump(result)));
    write_report(sibling(report, ".metrics.csv"), metrics_csv("repeated_split", cfg, result.aggregates));
    if (!g.quiet) {
      out << summary_table(result);
      out << "\nreport: " << report.string() << "\n";
    }
    return kExitOk;
  } catch (const RepeatError& e) {
    err << "error [" << to_string(e.cause()) << "] in repeat " << e.repeat() << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    return report_error(err, e, kExitRuntime);
  }
}

int cmd_variability(const GlobalOptions& g, const std::string& kind, std::size_t count, std::size_t threads,
                    std::ostream& out, std::ostream& err) {
  if (kind != "seed" && kind != "calibration") {
    err << "error: --kind must be 'seed' or 'calibration', got '" << kind << "'\n";
    return kExitUsage;
  }
  ExperimentConfig cfg;
  try {
    cfg = read_config(g);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const VariabilityResult result = kind == "seed" ? run_seed_variability(cfg, count, RunOptions{threads})
                                                    : run_calibration_variability(cfg, count, RunOptions{threads});
    const std::filesystem::path report =
        !g.out.empty() ? std::filesystem::path(g.out) : std::filesystem::path(kind + "_variability.json");
    write_report(report, serialize(variability_json(result)));
    write_report(sibling(report, ".trials.csv"), variability_trials_csv(result));
    write_report(sibling(report, ".metrics.csv"), metrics_csv(kind + "_variability", cfg, result.aggregates));
    if (!g.quiet) {
      out << variability_table(result);
      out << "\nreport: " << report.string() << "\n";
    }
    return kExitOk;
  } catch (const RepeatError& e) {
    err << "error [" << to_string(e.cause()) << "] in trial " << e.repeat() << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    return report_error(err, e, kExitRuntime);
  }
}

Label majority(const std::vector<Label>& truths) {
  const auto pos = std::count(truths.begin(), truths.end(), Label::Positive);
  return 2 * static_cast<std::size_t>(pos) > truths.size() ? Label::Positive : Label::Negative;
}

struct Group {
  std::vector<Label> truths;
  std::vector<std::vector<PredictionSet>> sets;  // per epsilon
  std::optional<Label> dominant;
};

int cmd_metrics(const GlobalOptions& g, const std::string& predictions, const std::string& dominant_flag,
                std::ostream& out, std::ostream& err) {
  if (predictions.empty()) {
    err << "error: --predictions is required\n";
    return kExitUsage;
  }
  std::optional<Label> forced_dominant;
  if (!dominant_flag.empty()) {
    const std::string v = detail::lower(dominant_flag);
    if (v == "active" || v == "1") forced_dominant = Label::Positive;
    else if (v == "inactive" || v == "0") forced_dominant = Label::Negative;
    else {
      err << "error: --dominant must be 'active' or 'inactive'\n";
      return kExitUsage;
    }
  }
  PredictionDump dump;
  try {
    dump = parse_prediction_dump(detail::read_file(predictions));
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << predictions << ": " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const bool grouped = dump.records.front().repeat.has_value();
    std::map<std::size_t, Group> groups;
    Group pooled;
    pooled.sets.resize(dump.epsilons.size());
    for (const auto& r : dump.records) {
      Group& grp = groups[r.repeat.value_or(0)];
      if (grp.sets.empty()) grp.sets.resize(dump.epsilons.size());
      grp.truths.push_back(r.truth);
      pooled.truths.push_back(r.truth);
      if (r.train_dominant) grp.dominant = r.train_dominant;
      for (std::size_t e = 0; e < dump.epsilons.size(); ++e) {
        grp.sets[e].push_back(r.sets[e]);
        pooled.sets[e].push_back(r.sets[e]);
      }
    }
    auto dominant_of = [&](const Group& grp) {
      if (forced_dominant) return *forced_dominant;
      if (grp.dominant) return *grp.dominant;
      return majority(grp.truths);
    };
    const std::vector<ScenarioKind> scenarios = all_scenarios();
    auto evaluate = [&](const Group& grp) {
      std::vector<EpsilonEvaluation> evals;
      for (std::size_t e = 0; e < dump.epsilons.size(); ++e) {
        evals.push_back(evaluate_sets(grp.truths, grp.sets[e], dump.epsilons[e], scenarios, dominant_of(grp)));
      }
      return evals;
    };

    Json doc;
    doc["metadata"] = {{"tool", kToolName},
                       {"version", kToolVersion},
                       {"source", predictions},
                       {"incl_caveat", kInclCaveat},
                       {"empty_note", kEmptyNote}};
    const std::vector<EpsilonEvaluation> pooled_evals = evaluate(pooled);
    Json pooled_json = Json::array();
    for (const auto& ev : pooled_evals) pooled_json.push_back(epsilon_evaluation_json(ev));
    doc["pooled"] = std::move(pooled_json);

    std::vector<NamedAggregate> aggs;
    if (grouped) {
      std::vector<std::vector<NamedValue>> trials;
      for (const auto& [rep, grp] : groups) trials.push_back(mcp_statistics(evaluate(grp)));
      aggs = aggregate_trials(trials, DispersionLabel::Sd);
      doc["repeats"] = groups.size();
      Json a = Json::array();
      for (const auto& agg : aggs) a.push_back(aggregate_json(agg));
      doc["aggregates"] = std::move(a);
    }
    if (!g.out.empty()) write_report(g.out, serialize(doc));

    if (!g.quiet) {
      out << "predictions: " << dump.records.size() << " rows";
      if (grouped) out << " in " << groups.size() << " repeats";
      out << "\n";
      for (const auto& ev : pooled_evals) {
        out << "\nsignificance " << detail::format_shortest(ev.epsilon.significance()) << " (confidence "
            << detail::format_shortest(ev.epsilon.confidence() * 100.0) << "%), pooled over all rows\n";
        out << confusion_table(ev.confusion);
        out << "both_rate " << detail::format_fixed(ev.rates.both_rate.value(), 4) << ", empty_rate "
            << detail::format_fixed(ev.rates.empty_rate.value(), 4) << "\n";
        out << "family                    kept      sensitivity  specificity  ccr\n";
        for (const auto& sc : ev.scenarios) {
          std::string line = to_string(sc.kind);
          line.resize(std::max<std::size_t>(line.size() + 2, 26), ' ');
          std::string kept = std::to_string(sc.outcome.kept) + "/" + std::to_string(sc.outcome.total);
          kept.resize(std::max<std::size_t>(kept.size() + 2, 10), ' ');
          line += kept;
          if (sc.metrics) {
            line += detail::format_fixed(sc.metrics->sensitivity(), 4) + "       " +
                    detail::format_fixed(sc.metrics->specificity(), 4) + "       " +
                    detail::format_fixed(sc.metrics->ccr(), 4);
          } else {
            line += "undefined (n=0)";
          }
          out << line << "\n";
        }
      }
      if (grouped) {
        out << "\nper-repeat aggregates (sd = sample standard deviation, n - 1 denominator)\n";
        for (const auto& agg : aggs) out << "  " << agg.name << "  " << format_plus_minus(agg) << "\n";
      }
      out << "\nnote: " << kInclCaveat << "\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(err, e, kExitRuntime);
  }
}

int cmd_synth(const GlobalOptions& g, const SyntheticSpec& spec, std::ostream& out, std::ostream& err) {
  if (g.out.empty()) {
    err << "error: --out is required\n";
    return kExitUsage;
  }
  Dataset ds = [&] {
    try {
      return generate_synthetic(spec);
    } catch (const Error& e) {
      err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
      throw;
    }
  }();
  write_dataset(ds, g.out);
  if (!g.quiet) {
    out << "wrote " << ds.size() << " instances (" << ds.count(Label::Positive) << " active, "
        << ds.count(Label::Negative) << " inactive, dim " << ds.dim() << ") to " << g.out << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mondrian conformal prediction and point-classifier evaluation", "mcpeval"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Experiment configuration file (key = value)");
  app.add_option("--out", g.out, "Output path");
  app.add_flag("--quiet", g.quiet, "Suppress the printed summary");

  std::size_t threads = 1;
  auto* run = app.add_subcommand("run", "Repeated train/test split comparison of point and conformal predictions");
  run->fallthrough();
  run->add_option("--threads", threads, "Worker threads for independent repeats")->check(CLI::PositiveNumber);

  std::string kind;
  std::size_t count = 0;
  auto* variability = app.add_subcommand("variability", "Seed or calibration-split variability study");
  variability->fallthrough();
  variability->add_option("--kind", kind, "seed | calibration")->required();
  variability->add_option("--count", count, "Number of seeds or calibration resamples")->required();
  variability->add_option("--threads", threads, "Worker threads for independent trials")->check(CLI::PositiveNumber);

  std::string predictions, dominant;
  auto* metrics = app.add_subcommand("metrics", "Recompute every metric family from a predictions CSV");
  metrics->fallthrough();
  metrics->add_option("--predictions", predictions, "Predictions CSV")->required();
  metrics->add_option("--dominant", dominant, "Class assigned to 'both' by empty_out_both_dominant");

  SyntheticSpec synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic two-Gaussian dataset CSV");
  synth_cmd->fallthrough();
  synth_cmd->add_option("--n", synth.n, "Number of instances")->required();
  synth_cmd->add_option("--dim", synth.dim, "Number of features")->required();
  synth_cmd->add_option("--balance", synth.class_balance, "Fraction of active instances")->required();
  synth_cmd->add_option("--separation", synth.separation, "Distance between class means")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(g, threads, out, err);
    if (variability->parsed()) return cmd_variability(g, kind, count, threads, out, err);
    if (metrics->parsed()) return cmd_metrics(g, predictions, dominant, out, err);
    if (synth_cmd->parsed()) return cmd_synth(g, synth, out, err);
  } catch (const Error& e) {
    if (synth_cmd->parsed() && e.code() == ErrorCode::DegenerateRequest) return kExitUsage;
    return report_error(err, e, kExitRuntime);
  }
  return kExitUsage;
}

}  // namespace mcpeval
