"""Exact checks of the biased-Fourier identities and the tail bounds.

Boolean functions are small (arity <= 4 for exhaustive work), so every
expectation over ``c ~ p`` is computed by enumerating all ``2^n`` inputs.
Expectations over the arcsine law use Gauss-Legendre quadrature in the angle
variable ``p = sin^2(theta)``, where the density becomes uniform and the
integrand is smooth.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dist import ArcsineInterval, phi_pair

MAX_ARITY = 20
QUAD_NODES = 64
QUAD_TOL = 1e-8


class QuadratureError(RuntimeError):
    pass


class BoundViolation(AssertionError):
    pass


class BooleanFunction:
    """``f : {-1,+1}^n -> R`` stored as a table.

    Input ``x`` (an integer) encodes ``c_i = +1`` when bit ``i`` is set.
    """

    def __init__(self, n: int, table):
        if not 0 <= n <= MAX_ARITY:
            raise ValueError(f"arity must be between 0 and {MAX_ARITY}")
        table = np.asarray(table, dtype=float)
        if table.shape != (2 ** n,):
            raise ValueError(f"table must have length {2 ** n}")
        self.n = n
        self.table = table

    @classmethod
    def from_callable(cls, n: int, fn: Callable) -> "BooleanFunction":
        return cls(n, [fn(c) for c in cls.inputs(n)])

    @staticmethod
    def inputs(n: int) -> np.ndarray:
        x = np.arange(2 ** n)
        return np.where((x[:, None] >> np.arange(n)) & 1, 1, -1).astype(np.int8)

    @classmethod
    def constant(cls, n: int, value: float = 1.0):
        return cls(n, np.full(2 ** n, float(value)))

    @classmethod
    def dictator(cls, n: int, i: int = 0):
        return cls(n, cls.inputs(n)[:, i])

    @classmethod
    def parity(cls, n: int):
        return cls(n, cls.inputs(n).prod(axis=1))

    @classmethod
    def majority(cls, n: int):
        return cls(n, np.where(cls.inputs(n).sum(axis=1) >= 0, 1, -1))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator):
        return cls(n, rng.choice([-1.0, 1.0], size=2 ** n))

    @classmethod
    def all_functions(cls, n: int):
        """Every ``{-1,+1}``-valued function of arity ``n`` (2^(2^n) of them)."""
        for vals in itertools.product((-1.0, 1.0), repeat=2 ** n):
            yield cls(n, vals)

    @property
    def is_sign_valued(self) -> bool:
        return bool(np.all(np.abs(self.table) == 1.0))

    def __call__(self, c) -> float:
        c = np.asarray(c)
        x = int(((c > 0).astype(int) << np.arange(self.n)).sum())
        return float(self.table[x])

    @property
    def at_all_minus(self) -> float:
        return float(self.table[0])

    @property
    def at_all_plus(self) -> float:
        return float(self.table[-1])

    def __repr__(self):
        return f"BooleanFunction(n={self.n}, table={self.table.astype(int).tolist()})"


def _plus_counts(n: int) -> np.ndarray:
    x = np.arange(2 ** n)
    return ((x[:, None] >> np.arange(max(n, 1))) & 1).sum(axis=1) if n else np.zeros(1, dtype=int)


def _weights(n: int, p):
    """Product-measure weights ``p^k (1-p)^(n-k)``; shape ``(len(p), 2^n)``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))[:, None]
    k = _plus_counts(n)[None, :]
    return p ** k * (1.0 - p) ** (n - k)


class GEvaluation(NamedTuple):
    value: float
    derivative: float


def g_eval(f: BooleanFunction, p: float) -> GEvaluation:
    """``g(p) = E_{c~p} f(c)`` and its derivative, by exact enumeration."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if f.n > MAX_ARITY:
        raise ValueError("arity too large for enumeration")
    n = f.n
    k = _plus_counts(n)
    m = n - k
    w = p ** k * (1.0 - p) ** m
    # d/dp of p^k (1-p)^m, with the k = 0 and m = 0 pieces dropped explicitly
    left = np.where(k > 0, k * p ** np.maximum(k - 1, 0) * (1.0 - p) ** m, 0.0)
    right = np.where(m > 0, m * p ** k * (1.0 - p) ** np.maximum(m - 1, 0), 0.0)
    return GEvaluation(float(f.table @ w), float(f.table @ (left - right)))


def correlation(f: BooleanFunction, p):
    """``E_{c~p}[f(c) * sum_i phi^p(c_i)]`` for an array of ``p``."""
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    plus, minus = phi_pair(p_arr)
    k = _plus_counts(f.n)[None, :]
    score_sum = k * plus[:, None] + (f.n - k) * minus[:, None]
    out = (_weights(f.n, p_arr) * f.table[None, :] * score_sum).sum(axis=1)
    return float(out[0]) if np.ndim(p) == 0 else out


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    error: float


def check_derivative_identity(f: BooleanFunction, p: float) -> IdentityCheck:
    """Compare ``E[f(c) sum phi(c_i)]`` with ``g'(p) sqrt(p(1-p))``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    lhs = correlation(f, p)
    rhs = g_eval(f, p).derivative * math.sqrt(p * (1.0 - p))
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))


def _angle_quadrature(fn, interval: ArcsineInterval, nodes: int):
    lo, hi = interval.angle_range
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    vals = np.asarray(fn(np.sin(theta) ** 2))
    # density is uniform in theta, so the mean is half the weighted sum
    return 0.5 * (w * vals).sum(axis=-1) if vals.ndim == 1 else 0.5 * vals @ w


def arcsine_expectation(fn, interval: ArcsineInterval, nodes: int = QUAD_NODES, tol: float = QUAD_TOL) -> float:
    """``E_{p ~ D_{a,b}}[fn(p)]``; ``fn`` takes an array of ``p``.

    The result is accepted only if doubling the node count changes it by at
    most ``tol``.
    """
    coarse = _angle_quadrature(fn, interval, nodes)
    fine = _angle_quadrature(fn, interval, 2 * nodes)
    if abs(fine - coarse) > tol:
        raise QuadratureError(f"quadrature unstable: {coarse!r} vs {fine!r}")
    return float(fine)


def check_interval_identity(f: BooleanFunction, a: float, b: float) -> IdentityCheck:
    """``E_{p~D_{a,b}}[E_c f(c) sum phi] `` against ``(g(b) - g(a)) C_{a,b}``."""
    interval = ArcsineInterval(a, b)
    lhs = arcsine_expectation(lambda p: correlation(f, p), interval)
    rhs = (g_eval(f, b).value - g_eval(f, a).value) * interval.normalizer
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))


def g_endpoint_gaps(f: BooleanFunction, alpha: float) -> tuple[float, float]:
    return (abs(g_eval(f, 1.0 - alpha).value - g_eval(f, 1.0).value),
            abs(g_eval(f, alpha).value - g_eval(f, 0.0).value))


def check_g_endpoint_bound(f: BooleanFunction, alpha: float) -> bool:
    """Both ``|g(1-a) - g(1)|`` and ``|g(a) - g(0)|`` are at most ``2 n a``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    hi, lo = g_endpoint_gaps(f, alpha)
    bound = 2 * f.n * alpha + 1e-12
    return hi <= bound and lo <= bound


def robustness_gamma(zeta: float) -> float:
    return (2.0 / math.pi) * (1.0 - 2.0 * zeta) / zeta


def xi_lower_bound(n: int, alpha: float, zeta: float) -> float:
    return (2.0 / math.pi) * (1.0 - 2.0 * zeta) * (1.0 - 2.0 * n * alpha)


def xi_lower_bound_repaired(n: int, alpha: float, zeta: float) -> float:
    """A bound that also covers decreasing ``g``.

    ``(g(1-a) - g(a)) C >= (g(1-a) - g(a))/pi`` needs the difference to be
    nonnegative.  Allowing a difference down to -2 costs
    ``2 (1 - 2 zeta)(C - 1/pi)``, which is O(sqrt(alpha)).
    """
    c = ArcsineInterval(alpha, 1.0 - alpha).normalizer
    return xi_lower_bound(n, alpha, zeta) - 2.0 * (1.0 - 2.0 * zeta) * (c - 1.0 / math.pi)


def xi_expectation(f: BooleanFunction, alpha: float, zeta: float, check: bool = True) -> tuple[float, float]:
    """Exact ``E[xi_{alpha,zeta}(f)]`` and its lower bound.

    ``xi`` adds ``gamma`` whenever the answer contradicts a constant column;
    that can only happen in the two special rounds.
    """
    if not 0.0 < alpha < 0.5 or not 0.0 < zeta < 0.5:
        raise ValueError("alpha and zeta must lie in (0, 1/2)")
    gamma = robustness_gamma(zeta)
    special = zeta * gamma * ((f.at_all_minus == 1.0) + (f.at_all_plus == -1.0))
    interior = check_interval_identity(f, alpha, 1.0 - alpha).lhs
    value = special + (1.0 - 2.0 * zeta) * interior
    lower = xi_lower_bound(f.n, alpha, zeta)
    if check and f.is_sign_valued and value < lower - 1e-9:
        raise BoundViolation(f"E[xi] = {value} below {lower} for {f}")
    return float(value), float(lower)


def phi_mgf(p: float, t: float) -> float:
    """Exact ``E_{c~p} exp(t phi^p(c))``."""
    plus, minus = phi_pair(np.array([p]))
    return float(p * math.exp(t * plus[0]) + (1.0 - p) * math.exp(t * minus[0]))


def phi_mgf_excess(alpha: float, p_grid, t_grid) -> float:
    """Largest ``E exp(t phi) - exp(t^2)`` over the grids (<= 0 when the bound holds)."""
    p = np.asarray(p_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.abs(t) > math.sqrt(alpha) / 2 + 1e-15):
        raise ValueError("t outside [-sqrt(alpha)/2, sqrt(alpha)/2]")
    plus, minus = phi_pair(p)
    lhs = p[:, None] * np.exp(t[None, :] * plus[:, None]) + (1 - p[:, None]) * np.exp(t[None, :] * minus[:, None])
    return float((lhs - np.exp(t[None, :] ** 2)).max())


def tail_bound(m: int, lam: float, alpha: float) -> float:
    return math.exp(-lam ** 2 / (4 * m)) + math.exp(-math.sqrt(alpha) * lam / 4)


class TailProbe(NamedTuple):
    empirical: float
    bound: float


def empirical_tail_phisum(p_vec, a_vec, lam: float, trials: int, rng: np.random.Generator,
                          alpha: float | None = None) -> TailProbe:
    """Monte-Carlo ``P(sum a_k phi^{p_k}(c_k) >= lam)`` and the analytic bound.

    ``alpha`` defaults to the largest value compatible with ``p_vec``.
    """
    p = np.asarray(p_vec, dtype=float)
    a = np.asarray(a_vec, dtype=float)
    if p.shape != a.shape:
        raise ValueError("p_vec and a_vec differ in length")
    if np.any(np.abs(a) > 1):
        raise ValueError("weights must lie in [-1, 1]")
    interior = p[(p > 0) & (p < 1)]
    if alpha is None:
        alpha = float(np.minimum(interior, 1 - interior).min()) if interior.size else 0.5
    if interior.size and np.any(np.minimum(interior, 1 - interior) < alpha - 1e-15):
        raise ValueError("p_vec has values outside [alpha, 1-alpha] u {0, 1}")
    plus, minus = phi_pair(p)
    hits = 0
    done = 0
    batch = max(1, min(trials, 2 ** 22 // max(1, p.size)))
    while done < trials:
        b = min(batch, trials - done)
        c = rng.random((b, p.size)) < p[None, :]
        s = (np.where(c, plus * a, minus * a)).sum(axis=1)
        hits += int((s >= lam).sum())
        done += b
    return TailProbe(hits / trials, tail_bound(p.size, lam, alpha))


@dataclass
class MgfReport:
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    constant: float

    @property
    def max_ratio(self) -> float:
        return float((self.lhs / self.rhs).max())

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs * (1 + 1e-12)))


def xi_moment_mgf_probe(f: BooleanFunction, alpha: float, zeta: float, t_grid) -> MgfReport:
    """Exact centred MGF of ``xi`` against ``exp(C t^2)``, ``C = 64 e^{n alpha/4}/alpha``."""
    if not 0.25 <= zeta < 0.5:
        raise ValueError("zeta must lie in [1/4, 1/2)")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(np.abs(t) > math.sqrt(alpha) / 8 + 1e-15):
        raise ValueError("t outside [-sqrt(alpha)/8, sqrt(alpha)/8]")
    mean, _ = xi_expectation(f, alpha, zeta, check=False)
    gamma = robustness_gamma(zeta)
    jump0 = gamma * (f.at_all_minus == 1.0)
    jump1 = gamma * (f.at_all_plus == -1.0)
    k = _plus_counts(f.n)[None, :]
    interval = ArcsineInterval(alpha, 1.0 - alpha)

    def interior(p, tt):
        plus, minus = phi_pair(p)
        xi = f.table[None, :] * (k * plus[:, None] + (f.n - k) * minus[:, None])
        return (_weights(f.n, p) * np.exp(tt * (xi - mean))).sum(axis=1)

    lhs = np.array([
        zeta * math.exp(tt * (jump0 - mean)) + zeta * math.exp(tt * (jump1 - mean))
        + (1 - 2 * zeta) * arcsine_expectation(lambda p, tt=tt: interior(p, tt), interval)
        for tt in t
    ])
    C = 64.0 * math.exp(f.n * alpha / 4.0) / alpha
    return MgfReport(t=t, lhs=lhs, rhs=np.exp(C * t ** 2), constant=C)
