"""The identity and bound suite behind ``verify-lemmas``.

Each row is ``(lemma, instance, lhs, rhs, margin, pass)``.  For identities the
margin is ``tol - |lhs - rhs|``; for inequalities ``lhs <= rhs`` it is
``rhs - lhs``.  A row passes when its margin is nonnegative.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass

import numpy as np

from .. import analysis
from ..analysis import BooleanFunction
from ..dist import phi_pair
from ..ifpc import derive_params
from ..rng import stream

P_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
IDENTITY_TOL = 1e-9
INTERVAL_TOL = 1e-6


@dataclass(frozen=True)
class LemmaRow:
    lemma: str
    instance: str
    lhs: float
    rhs: float
    margin: float
    passed: bool


def _identity(lemma, instance, lhs, rhs, tol):
    margin = tol - abs(lhs - rhs)
    return LemmaRow(lemma, instance, lhs, rhs, margin, margin >= 0)


def _upper(lemma, instance, lhs, rhs):
    margin = rhs - lhs
    return LemmaRow(lemma, instance, lhs, rhs, margin, margin >= 0)


def _tag(f: BooleanFunction) -> str:
    return f"n={f.n};f={''.join('+' if v > 0 else '-' for v in f.table)}"


def derivative_rows(n: int = 3, p_grid=P_GRID):
    for f in BooleanFunction.all_functions(n):
        for p in p_grid:
            lhs, rhs, _ = analysis.check_derivative_identity(f, p)
            yield _identity("derivative_identity", f"{_tag(f)};p={p}", lhs, rhs, IDENTITY_TOL)


def interval_rows(count: int = 500, n: int = 4, a: float = 0.1, b: float = 0.9, seed: int = 0):
    rng = stream(seed, "analysis")
    for _ in range(count):
        f = BooleanFunction.random(n, rng)
        lhs, rhs, _ = analysis.check_interval_identity(f, a, b)
        yield _identity("interval_identity", f"{_tag(f)};a={a};b={b}", lhs, rhs, INTERVAL_TOL)


def endpoint_rows(n: int = 3, alphas=(0.01, 0.05, 0.1, 0.2)):
    for f in BooleanFunction.all_functions(n):
        for alpha in alphas:
            hi, lo = analysis.g_endpoint_gaps(f, alpha)
            yield _upper("g_endpoint_bound", f"{_tag(f)};alpha={alpha}", max(hi, lo), 2 * n * alpha + 1e-12)


def xi_rows(max_n: int = 3, betas=(0.0, 0.25)):
    for beta in betas:
        for n in range(1, max_n + 1):
            prm = derive_params(n, n, beta=beta)
            for f in BooleanFunction.all_functions(n):
                value, lower = analysis.xi_expectation(f, prm.alpha, prm.zeta, check=False)
                repaired = analysis.xi_lower_bound_repaired(n, prm.alpha, prm.zeta)
                # lower-bound checks: value >= bound - 1e-9
                yield _upper("xi_expectation", f"{_tag(f)};beta={beta}", lower - 1e-9, value)
                yield _upper("xi_expectation_repaired", f"{_tag(f)};beta={beta}", repaired - 1e-9, value)


def phi_mgf_rows(alpha: float = 1 / 32, points: int = 41):
    ps = np.concatenate([[0.0, 1.0], np.linspace(alpha, 1 - alpha, points)])
    ts = np.linspace(-math.sqrt(alpha) / 2, math.sqrt(alpha) / 2, points)
    for p in ps:
        plus, minus = phi_pair(np.array([p]))
        lhs = p * np.exp(ts * plus[0]) + (1 - p) * np.exp(ts * minus[0])
        rhs = np.exp(ts ** 2) + 1e-12
        k = int(np.argmin(rhs - lhs))
        yield _upper("phi_mgf", f"alpha={alpha:g};p={p:.6g};t={ts[k]:.6g}", float(lhs[k]), float(rhs[k]))


TAIL_CELLS = ((100, 10.0), (100, 20.0), (100, 30.0), (400, 40.0), (400, 60.0))


def tail_rows(trials: int = 10_000, alpha: float = 1 / 32, seed: int = 0, cells=TAIL_CELLS):
    rng = stream(seed, "analysis")
    for m, lam in cells:
        # biases drawn from the code's mixture, fixed +-1 weights
        p = np.where(rng.random(m) < 0.25, rng.integers(0, 2, m).astype(float),
                     alpha + (1 - 2 * alpha) * rng.random(m))
        a = rng.choice([-1.0, 1.0], size=m)
        emp, bound = analysis.empirical_tail_phisum(p, a, lam, trials, rng, alpha=alpha)
        se = math.sqrt(max(emp * (1 - emp), 1.0 / trials) / trials)
        yield _upper("tail_phisum", f"m={m};lambda={lam:g};trials={trials}", emp, bound + 3 * se)


def xi_mgf_rows(count: int = 5, n: int = 3, beta: float = 0.0, points: int = 9, seed: int = 0):
    rng = stream(seed, "analysis")
    prm = derive_params(n, n, beta=beta)
    t = np.linspace(-math.sqrt(prm.alpha) / 8, math.sqrt(prm.alpha) / 8, points)
    for _ in range(count):
        f = BooleanFunction.random(n, rng)
        rep = analysis.xi_moment_mgf_probe(f, prm.alpha, prm.zeta, t)
        k = int(np.argmax(rep.lhs / rep.rhs))
        yield _upper("xi_mgf", f"{_tag(f)};t={t[k]:.6g}", float(rep.lhs[k]), float(rep.rhs[k]))


def lemma_rows(seed: int = 0, tail_trials: int = 10_000):
    yield from derivative_rows()
    yield from interval_rows(seed=seed)
    yield from endpoint_rows()
    yield from xi_rows()
    yield from phi_mgf_rows()
    yield from tail_rows(trials=tail_trials, seed=seed)
    yield from xi_mgf_rows(seed=seed)


def write_csv(rows, path) -> tuple[int, int]:
    """Write rows; returns ``(total, failed)``."""
    total = failed = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lemma", "instance", "lhs", "rhs", "margin", "pass"])
        for row in rows:
            total += 1
            failed += not row.passed
            lemma, instance, lhs, rhs, margin, ok = astuple(row)
            w.writerow([lemma, instance, repr(lhs), repr(rhs), repr(margin), ok])
    return total, failed
