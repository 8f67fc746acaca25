"""Calibrated constants for scaled-mode parameters.

Scaled mode replaces the construction's proof constants by
``ell = c2 * n^2`` and ``sigma = c1 * sqrt(ell * ln(1/delta))``.  The
constants per ``(beta, delta)`` live in ``data/calibration.json``, written
by :func:`ifpcsim.harness.calibrate.calibrate`.  Settings missing from the
table are extrapolated from the nearest entry using the asymptotic length
``n^2 log(1/delta) / (1/2 - beta)^4``.
"""
from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources

TABLE_VERSION = 1


@lru_cache(maxsize=1)
def load_table() -> dict:
    text = resources.files("ifpcsim").joinpath("data/calibration.json").read_text()
    table = json.loads(text)
    if table.get("version") != TABLE_VERSION:
        raise ValueError(f"calibration table version {table.get('version')} != {TABLE_VERSION}")
    return table


def _log_inv(delta: float) -> float:
    return math.log(1.0 / delta) if delta < 1 else 1.0


def default_constants(beta: float, delta: float) -> tuple[float, float]:
    entries = load_table()["entries"]
    for e in entries:
        if math.isclose(e["beta"], beta, abs_tol=1e-12) and math.isclose(e["delta"], delta, rel_tol=1e-9):
            return float(e["c1"]), float(e["c2"])
    ref = min(entries, key=lambda e: (abs(e["beta"] - beta), abs(math.log(e["delta"] / delta))))
    shape = _log_inv(delta) / (0.5 - beta) ** 4
    ref_shape = _log_inv(ref["delta"]) / (0.5 - ref["beta"]) ** 4
    return float(ref["c1"]), float(ref["c2"]) * shape / ref_shape
