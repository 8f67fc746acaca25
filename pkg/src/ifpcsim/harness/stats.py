"""Monte-Carlo summaries."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def wilson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def mean_stderr(values) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def proportion(flags, level: float = 0.95) -> dict:
    flags = [bool(f) for f in flags]
    k, n = sum(flags), len(flags)
    low, high = wilson(k, n, level)
    return {"count": k, "trials": n, "rate": k / n if n else math.nan, "wilson_low": low, "wilson_high": high}


def ks_pvalue(a, b) -> float:
    return float(stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).pvalue)
