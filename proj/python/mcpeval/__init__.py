"""Mondrian conformal prediction and point-classifier evaluation."""

import json

from ._core import (
    Error,
    __version__,
    aggregate,
    apply_scenario,
    generate_synthetic,
    metrics,
    nonconformity,
    p_values,
    prediction_set,
    run_cli,
    run_report,
    scenarios,
    tally,
    variability_report,
)


def run(config_text, threads=1):
    """Repeated-split experiment from `key = value` config text; returns the report dict."""
    return json.loads(run_report(config_text, threads))


def variability(config_text, kind, count, threads=1):
    """Seed or calibration variability study; returns the report dict."""
    return json.loads(variability_report(config_text, kind, count, threads))


__all__ = [
    "Error",
    "aggregate",
    "apply_scenario",
    "generate_synthetic",
    "metrics",
    "nonconformity",
    "p_values",
    "prediction_set",
    "run",
    "run_cli",
    "run_report",
    "scenarios",
    "tally",
    "variability",
    "variability_report",
]
