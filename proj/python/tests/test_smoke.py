import math

import pytest

import mcpeval

CONFIG = """
synth.n = 120
synth.dim = 3
seed = 5
model.trees = 10
model.depth = 5
split.repeats = 3
"""


def test_p_values_and_sets():
    assert mcpeval.p_values([0.1, 0.2, 0.3], [0.5], 0.75) == (0.5, 0.5)
    assert mcpeval.nonconformity(0.3, 1) == pytest.approx(0.7)
    assert mcpeval.prediction_set(0.5, 0.05, 0.1) == "positive"
    assert mcpeval.prediction_set(0.1, 0.5, 0.1) == "negative"


def test_metric_families():
    c = dict(tp=6, fn=2, bp=2, ep=0, tn=8, fp=1, bn=1, en=0)
    assert mcpeval.metrics(c, "excl")["ccr"] == pytest.approx(0.7)
    assert mcpeval.metrics(c, "incl")["ccr"] == pytest.approx(0.85)
    out = mcpeval.apply_scenario(c, "uncertain_out")
    assert out["kept"] == 17
    assert out["sensitivity"] == pytest.approx(0.75)


def test_tally_and_errors():
    c = mcpeval.tally([1, 0, 1], ["both", "empty", "positive"])
    assert (c["bp"], c["en"], c["tp"]) == (1, 1, 1)
    with pytest.raises(mcpeval.Error, match="MetricUndefined"):
        mcpeval.metrics(dict(tn=3), "excl")
    with pytest.raises(mcpeval.Error, match="LengthMismatch"):
        mcpeval.tally([1], [])


def test_aggregate():
    s = mcpeval.aggregate([0.6, 0.8])
    assert s["mean"] == pytest.approx(0.7)
    assert s["se"] == pytest.approx(0.1)
    assert s["dispersion_label"] == "sd"
    assert mcpeval.aggregate([0.3])["sd"] is None


def test_synthetic():
    d = mcpeval.generate_synthetic(50, 2, 0.3, 1.0, 4)
    assert len(d["labels"]) == 50
    assert sum(d["labels"]) == 15
    assert all(len(row) == 2 for row in d["features"])


def test_run_report_is_deterministic():
    a = mcpeval.run(CONFIG)
    b = mcpeval.run(CONFIG, threads=2)
    assert a == b
    assert len(a["repeats"]) == 3
    for agg in a["aggregates"]:
        if "dispersion" in agg:
            assert agg["dispersion_label"] == "sd" and agg["n"] > 0
    ccr = [g for g in a["aggregates"] if g["statistic"] == "point.ccr"][0]
    assert 0.0 <= ccr["value"] <= 1.0 and not math.isnan(ccr["value"])


def test_variability_and_cli():
    v = mcpeval.variability(CONFIG, "calibration", 3)
    assert v["trial_count"] == 3
    with pytest.raises(mcpeval.Error, match="ConfigError"):
        mcpeval.run("synth.n = 50\nsynth.dim = 2\neps.grid = 1.5\n")
    code, _, err = mcpeval.run_cli(["variability", "--kind", "foo", "--count", "2"])
    assert code == 1
