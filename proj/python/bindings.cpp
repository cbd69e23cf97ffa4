#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mcpeval/cli.hpp"
#include "mcpeval/conformal.hpp"
#include "mcpeval/dataset.hpp"
#include "mcpeval/error.hpp"
#include "mcpeval/metrics.hpp"
#include "mcpeval/protocol.hpp"
#include "mcpeval/report.hpp"

namespace py = pybind11;
using namespace mcpeval;

namespace {

Label label_of(int v) {
  if (v == 1) return Label::Positive;
  if (v == 0) return Label::Negative;
  throw Error(ErrorCode::UnknownLabelValue, "label must be 0 or 1, got " + std::to_string(v));
}

PredictionSet set_of(const std::string& s) {
  if (auto p = parse_prediction_set(s)) return *p;
  throw Error(ErrorCode::InvalidArgument, "unknown prediction set '" + s + "'");
}

ScenarioKind scenario_of(const std::string& s) {
  if (auto k = parse_scenario(s)) return *k;
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + s + "'");
}

DispersionLabel dispersion_of(const std::string& s) {
  if (s == "sd") return DispersionLabel::Sd;
  if (s == "se") return DispersionLabel::Se;
  throw Error(ErrorCode::InvalidArgument, "dispersion must be 'sd' or 'se'");
}

py::dict triple_dict(const MetricTriple& m) {
  py::dict d;
  d["sensitivity"] = m.sensitivity();
  d["specificity"] = m.specificity();
  d["ccr"] = m.ccr();
  return d;
}

py::dict confusion_dict(const McpConfusion& c) {
  py::dict d;
  d["tp"] = c.tp;
  d["fn"] = c.fn;
  d["bp"] = c.bp;
  d["ep"] = c.ep;
  d["fp"] = c.fp;
  d["tn"] = c.tn;
  d["bn"] = c.bn;
  d["en"] = c.en;
  return d;
}

McpConfusion confusion_from(const py::dict& d) {
  auto get = [&](const char* k) { return d.contains(k) ? d[k].cast<std::uint64_t>() : std::uint64_t{0}; };
  return McpConfusion{get("tp"), get("fn"), get("bp"), get("ep"), get("fp"), get("tn"), get("bn"), get("en")};
}

std::vector<Label> labels_of(const std::vector<int>& v) {
  std::vector<Label> out;
  for (int x : v) out.push_back(label_of(x));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mondrian conformal prediction and point-classifier evaluation";

  static py::exception<Error> exc(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(exc, (std::string("[") + to_string(e.code()) + "] " + e.what()).c_str());
    }
  });

  m.def(
      "generate_synthetic",
      [](std::size_t n, std::size_t dim, double balance, double separation, std::uint64_t seed) {
        const Dataset ds = generate_synthetic(SyntheticSpec{n, dim, balance, separation, seed});
        py::dict d;
        std::vector<std::string> ids;
        std::vector<int> labels;
        std::vector<std::vector<double>> features;
        for (const auto& inst : ds.instances()) {
          ids.push_back(inst.id);
          labels.push_back(inst.label == Label::Positive ? 1 : 0);
          features.push_back(inst.features);
        }
        d["ids"] = ids;
        d["labels"] = labels;
        d["features"] = features;
        return d;
      },
      py::arg("n"), py::arg("dim"), py::arg("balance") = 0.5, py::arg("separation") = 1.0, py::arg("seed") = 0,
      "Two-Gaussian dataset as a dict of ids, labels (1 active, 0 inactive) and feature rows.");

  m.def(
      "nonconformity", [](double proba_pos, int label) { return nonconformity(proba_pos, label_of(label)); },
      py::arg("proba_pos"), py::arg("label"));

  m.def(
      "p_values",
      [](std::vector<double> pos_scores, std::vector<double> neg_scores, double proba_pos) {
        std::sort(pos_scores.begin(), pos_scores.end());
        std::sort(neg_scores.begin(), neg_scores.end());
        const PValuePair p = p_values(CalibrationTable(pos_scores, neg_scores), proba_pos);
        return std::make_pair(p.p_pos, p.p_neg);
      },
      py::arg("pos_scores"), py::arg("neg_scores"), py::arg("proba_pos"),
      "Mondrian p-values (p_pos, p_neg) from per-class calibration nonconformity scores.");

  m.def(
      "prediction_set",
      [](double p_pos, double p_neg, double significance) {
        return std::string(to_string(prediction_set({p_pos, p_neg}, Epsilon(significance))));
      },
      py::arg("p_pos"), py::arg("p_neg"), py::arg("significance"));

  m.def(
      "tally",
      [](const std::vector<int>& truths, const std::vector<std::string>& sets) {
        std::vector<PredictionSet> s;
        for (const auto& x : sets) s.push_back(set_of(x));
        return confusion_dict(tally(labels_of(truths), s));
      },
      py::arg("truths"), py::arg("sets"), "Eight-cell table from true labels and set names.");

  m.def(
      "metrics",
      [](const py::dict& confusion, const std::string& family) {
        const McpConfusion c = confusion_from(confusion);
        if (family == "excl") return triple_dict(metrics_excl(c));
        if (family == "incl") return triple_dict(metrics_incl(c));
        if (family == "uncertain_out") return triple_dict(metrics_uncertain_out(c));
        throw Error(ErrorCode::InvalidArgument, "family must be excl, incl or uncertain_out");
      },
      py::arg("confusion"), py::arg("family"));

  m.def(
      "apply_scenario",
      [](const py::dict& confusion, const std::string& scenario, int dominant) {
        const ScenarioResult r = apply_scenario(confusion_from(confusion), {scenario_of(scenario), label_of(dominant)});
        py::dict d = triple_dict(r.metrics);
        d["kept"] = r.outcome.kept;
        d["total"] = r.outcome.total;
        d["kept_fraction"] = r.outcome.kept_fraction().value();
        return d;
      },
      py::arg("confusion"), py::arg("scenario"), py::arg("dominant") = 0);

  m.def("scenarios", [] {
    std::vector<std::string> out;
    for (ScenarioKind k : all_scenarios()) out.emplace_back(to_string(k));
    return out;
  });

  m.def(
      "aggregate",
      [](const std::vector<double>& values, const std::string& dispersion) {
        const AggregateStat s = aggregate(values, dispersion_of(dispersion));
        py::dict d;
        d["mean"] = s.mean;
        d["median"] = s.median;
        d["sd"] = s.sd ? py::cast(*s.sd) : py::none();
        d["se"] = s.se ? py::cast(*s.se) : py::none();
        d["n"] = s.n;
        d["dispersion_label"] = dispersion;
        return d;
      },
      py::arg("values"), py::arg("dispersion") = "sd");

  m.def(
      "run_report",
      [](const std::string& config_text, std::size_t threads) {
        const ExperimentConfig cfg = parse_config(config_text);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_repeated_split(cfg, RunOptions{threads});
        }
        return serialize(report_json(r));
      },
      py::arg("config_text"), py::arg("threads") = 1, "Repeated-split experiment; returns the JSON report text.");

  m.def(
      "variability_report",
      [](const std::string& config_text, const std::string& kind, std::size_t count, std::size_t threads) {
        const ExperimentConfig cfg = parse_config(config_text);
        if (kind != "seed" && kind != "calibration") {
          throw Error(ErrorCode::ConfigError, "kind must be 'seed' or 'calibration'");
        }
        VariabilityResult r;
        {
          py::gil_scoped_release release;
          r = kind == "seed" ? run_seed_variability(cfg, count, RunOptions{threads})
                             : run_calibration_variability(cfg, count, RunOptions{threads});
        }
        return serialize(variability_json(r));
      },
      py::arg("config_text"), py::arg("kind"), py::arg("count"), py::arg("threads") = 1);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");

  m.attr("__version__") = kToolVersion;
}
