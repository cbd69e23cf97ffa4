#include <doctest.h>

#include <sstream>

#include "mcpeval/cli.hpp"
#include "mcpeval/error.hpp"
#include "mcpeval/report.hpp"
#include "test_support.hpp"

using namespace mcpeval;
using mcpeval::testing::error_code_of;
using mcpeval::testing::read_text;
using mcpeval::testing::TempDir;
using mcpeval::testing::write_text;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kSmallConfig =
    "synth.n = 120\nsynth.dim = 3\nsynth.separation = 1.5\nseed = 11\n"
    "model.trees = 10\nmodel.depth = 5\nsplit.repeats = 4\n";

const Json& scenario_of(const Json& eval, const std::string& name) {
  for (const Json& s : eval["scenarios"]) {
    if (s["scenario"] == name) return s;
  }
  throw std::logic_error("scenario not found: " + name);
}

}  // namespace

TEST_CASE("aggregate_json always labels dispersion") {
  const std::vector<double> v{0.5, 0.7, 0.9};
  const NamedAggregate agg{"x", aggregate(v), 1};
  const Json j = aggregate_json(agg);
  CHECK(j["dispersion_label"] == "sd");
  CHECK(j["n"] == 3);
  CHECK(j["undefined_count"] == 1);
  CHECK(j["dispersion"].get<double>() == doctest::Approx(0.2));

  const NamedAggregate none{"y", std::nullopt, 4};
  CHECK(aggregate_json(none)["value"] == "undefined (n=0)");

  AggregateStat unlabeled = aggregate(v);
  unlabeled.dispersion_label.reset();
  CHECK(error_code_of([&] { aggregate_json({"z", unlabeled, 0}); }) == ErrorCode::ReportError);

  CHECK(format_plus_minus(agg) == "0.7000 ± 0.2000 sd (n=3)");
  const std::vector<double> one{0.25};
  CHECK(format_plus_minus({"w", aggregate(one), 0}) == "0.2500 (sd undefined, n=1)");
  CHECK(format_plus_minus(none) == "undefined (n=0)");
}

TEST_CASE("serializer rejects unlabeled dispersion anywhere in the document") {
  Json doc;
  doc["a"]["b"] = Json::array({Json{{"value", 1.0}, {"dispersion", 0.1}, {"n", 3}}});
  CHECK(error_code_of([&] { serialize(doc); }) == ErrorCode::ReportError);
  doc["a"]["b"][0]["dispersion_label"] = "sd";
  CHECK_NOTHROW(serialize(doc));
  doc["a"]["b"][0].erase("n");
  CHECK(error_code_of([&] { serialize(doc); }) == ErrorCode::ReportError);
  doc["a"]["b"][0]["n"] = 0;
  CHECK(error_code_of([&] { serialize(doc); }) == ErrorCode::ReportError);
}

TEST_CASE("report metadata names the model and conventions") {
  ExperimentConfig cfg = parse_config(kSmallConfig);
  const Json doc = report_json(run_repeated_split(cfg));
  const Json& m = doc["metadata"];
  CHECK(m["tool"] == kToolName);
  CHECK(m["model"].get<std::string>().find("random_forest(trees=10") == 0);
  CHECK(m.contains("p_value_convention"));
  CHECK(m.contains("aggregation_interpretation"));
  CHECK(m.contains("incl_caveat"));
  CHECK(m["config"]["seed"] == "11");
  CHECK(doc["repeats"].size() == 4);
  CHECK_NOTHROW(check_dispersion_labels(doc));

  cfg.scenarios = {ScenarioKind::Excl};
  cfg.split.repeats = 1;
  CHECK_FALSE(report_json(run_repeated_split(cfg))["metadata"].contains("incl_caveat"));
}

TEST_CASE("cli run writes byte-identical outputs on rerun") {
  TempDir dir("run");
  write_text(dir / "exp.cfg", kSmallConfig);
  const std::string cfg = (dir / "exp.cfg").string();
  const CliRun a = cli({"--config", cfg, "--out", (dir / "a.json").string(), "run"});
  REQUIRE_MESSAGE(a.code == kExitOk, a.err);
  CHECK(a.out.find("report:") != std::string::npos);
  const CliRun b = cli({"--config", cfg, "--out", (dir / "b.json").string(), "--quiet", "run", "--threads", "3"});
  REQUIRE(b.code == kExitOk);
  CHECK(b.out.empty());
  CHECK(read_text(dir / "a.json") == read_text(dir / "b.json"));
  CHECK(read_text(dir / "a.predictions.csv") == read_text(dir / "b.predictions.csv"));
  CHECK(read_text(dir / "a.metrics.csv") == read_text(dir / "b.metrics.csv"));
  CHECK(read_text(dir / "a.metrics.csv").rfind("experiment,epsilon,confidence,scenario,dispersion_label", 0) == 0);
}

TEST_CASE("metrics recomputed from the dump match the run report") {
  TempDir dir("roundtrip");
  write_text(dir / "exp.cfg", kSmallConfig);
  REQUIRE(cli({"--config", (dir / "exp.cfg").string(), "--out", (dir / "r.json").string(), "--quiet", "run"}).code ==
          kExitOk);
  const CliRun m = cli({"--out", (dir / "m.json").string(), "metrics", "--predictions",
                        (dir / "r.predictions.csv").string()});
  REQUIRE_MESSAGE(m.code == kExitOk, m.err);
  CHECK(m.out.find("empty_out_both_dominant") != std::string::npos);

  const Json run = Json::parse(read_text(dir / "r.json"));
  const Json met = Json::parse(read_text(dir / "m.json"));
  CHECK(met["repeats"] == 4);
  std::size_t compared = 0;
  for (const Json& a : run["aggregates"]) {
    const std::string name = a["statistic"];
    if (name.rfind("mcp.", 0) != 0) continue;
    bool found = false;
    for (const Json& b : met["aggregates"]) {
      if (b["statistic"] != name) continue;
      found = true;
      CHECK_MESSAGE(a == b, name);
    }
    CHECK_MESSAGE(found, name);
    ++compared;
  }
  CHECK(compared > 50);
}

TEST_CASE("metrics on the eight-outcome dump") {
  TempDir dir("eight");
  write_text(dir / "p.csv",
             "id,true_label,set_0.1\n"
             "a,1,positive\nb,1,negative\nc,1,both\nd,1,empty\n"
             "e,0,positive\nf,0,negative\ng,0,both\nh,0,empty\n");
  const CliRun r = cli({"--out", (dir / "m.json").string(), "metrics", "--predictions", (dir / "p.csv").string()});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const Json doc = Json::parse(read_text(dir / "m.json"));
  const Json& ev = doc["pooled"][0];
  for (const char* cell : {"tp", "fn", "bp", "ep", "fp", "tn", "bn", "en"}) CHECK(ev["confusion"][cell] == 1);
  const Json& out = scenario_of(ev, "uncertain_out");
  CHECK(out["kept"] == 4);
  CHECK(out["sensitivity"] == 0.5);
  CHECK(out["specificity"] == 0.5);
  CHECK(scenario_of(ev, "excl")["ccr"] == 0.25);
  CHECK(scenario_of(ev, "incl")["ccr"] == 0.5);
  CHECK_FALSE(doc.contains("aggregates"));
}

TEST_CASE("singleton-only predictions give equal families") {
  TempDir dir("single");
  write_text(dir / "p.csv",
             "true_label,set_0.2\n1,positive\n1,positive\n1,negative\n0,negative\n0,positive\n0,negative\n");
  REQUIRE(cli({"--out", (dir / "m.json").string(), "--quiet", "metrics", "--predictions", (dir / "p.csv").string()})
              .code == kExitOk);
  const Json ev = Json::parse(read_text(dir / "m.json"))["pooled"][0];
  const Json& ex = scenario_of(ev, "excl");
  for (const char* fam : {"incl", "uncertain_out", "empty_out_both_positive", "empty_out_both_negative"}) {
    const Json& s = scenario_of(ev, fam);
    CHECK(s["sensitivity"] == ex["sensitivity"]);
    CHECK(s["specificity"] == ex["specificity"]);
    CHECK(s["ccr"] == ex["ccr"]);
  }
}

TEST_CASE("cli exit codes") {
  TempDir dir("codes");
  write_text(dir / "bad.cfg", "synth.n = 100\nsynth.dim = 2\neps.grid = 1.5\n");
  const CliRun bad = cli({"--config", (dir / "bad.cfg").string(), "run"});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("eps.grid") != std::string::npos);

  write_text(dir / "ok.cfg", kSmallConfig);
  CHECK(cli({"--config", (dir / "ok.cfg").string(), "variability", "--kind", "foo", "--count", "3"}).code ==
        kExitUsage);
  CHECK(cli({"--config", (dir / "ok.cfg").string(), "variability", "--kind", "seed", "--count", "1"}).code ==
        kExitUsage);
  CHECK(cli({"run"}).code == kExitUsage);
  CHECK(cli({"--config", (dir / "missing.cfg").string(), "run"}).code == kExitUsage);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"--out", (dir / "s.csv").string(), "synth", "--n", "10", "--dim", "2", "--balance", "0",
             "--separation", "1", "--seed", "1"})
            .code == kExitUsage);

  write_text(dir / "p.csv", "id,set_0.1\na,both\n");
  const CliRun missing = cli({"metrics", "--predictions", (dir / "p.csv").string()});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("true_label") != std::string::npos);

  // A training set holding one class fails at run time.
  write_text(dir / "one.csv", "label,x\n1,0.1\n1,0.2\n1,0.3\n1,0.4\n1,0.5\n1,0.6\n");
  write_text(dir / "one.cfg", "data.path = " + (dir / "one.csv").string() + "\nsplit.repeats = 1\n");
  CHECK(cli({"--config", (dir / "one.cfg").string(), "--out", (dir / "o.json").string(), "run"}).code ==
        kExitRuntime);
}

TEST_CASE("cli variability writes labeled outputs") {
  TempDir dir("var");
  write_text(dir / "exp.cfg", kSmallConfig);
  const CliRun r = cli({"--config", (dir / "exp.cfg").string(), "--out", (dir / "v.json").string(), "variability",
                        "--kind", "calibration", "--count", "5"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const Json doc = Json::parse(read_text(dir / "v.json"));
  CHECK(doc["trial_count"] == 5);
  CHECK(doc["metadata"]["kind"] == "calibration_variability");
  for (const Json& a : doc["aggregates"]) {
    if (a.contains("dispersion")) CHECK(a["dispersion_label"] == "sd");
  }
  CHECK(read_text(dir / "v.trials.csv").size() > 0);
}

TEST_CASE("cli synth is deterministic") {
  TempDir dir("synth");
  const std::vector<std::string> base{"synth", "--n", "50", "--dim", "3", "--balance", "0.3", "--separation", "1",
                                      "--seed", "4", "--quiet"};
  auto args_a = base;
  args_a.insert(args_a.begin(), {"--out", (dir / "a.csv").string()});
  auto args_b = base;
  args_b.insert(args_b.begin(), {"--out", (dir / "b.csv").string()});
  REQUIRE(cli(args_a).code == kExitOk);
  REQUIRE(cli(args_b).code == kExitOk);
  CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
  const Dataset ds = load_dataset(dir / "a.csv");
  CHECK(ds.size() == 50);
  CHECK(ds.count(Label::Positive) == 15);
}

TEST_CASE("confusion_table lays out the eight cells") {
  McpConfusion c;
  c.tp = 6;
  c.bp = 2;
  c.tn = 8;
  const std::string t = confusion_table(c);
  CHECK(t.find("positive") != std::string::npos);
  CHECK(t.find("both") != std::string::npos);
  CHECK(t.find('6') != std::string::npos);
}
