"""Bias distributions for the fingerprinting code.

``D_{a,b}`` is the arcsine law restricted to ``(a, b)`` (density proportional
to ``1/sqrt(p(1-p))``), and the mixture ``Dbar_{alpha,zeta}`` puts mass
``zeta`` on each of the points 0 and 1 and the rest on ``D_{alpha,1-alpha}``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Kind(enum.IntEnum):
    INTERIOR = 0
    SPECIAL0 = 1
    SPECIAL1 = 2


@dataclass(frozen=True)
class ArcsineInterval:
    a: float = 0.0
    b: float = 1.0
    normalizer: float = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.a < self.b <= 1.0):
            raise ValueError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")
        width = 2.0 * math.asin(math.sqrt(self.b)) - 2.0 * math.asin(math.sqrt(self.a))
        object.__setattr__(self, "normalizer", 1.0 / width)

    @property
    def angle_range(self) -> tuple[float, float]:
        return math.asin(math.sqrt(self.a)), math.asin(math.sqrt(self.b))

    def density(self, p):
        p = np.asarray(p, dtype=float)
        inside = (p > self.a) & (p < self.b)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.normalizer / np.sqrt(p * (1.0 - p))
        return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class BiasMixture:
    alpha: float
    zeta: float
    interior: ArcsineInterval = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise ValueError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        # zeta = 1/2 leaves no interior mass; allowed for degenerate tests
        if not (0.0 < self.zeta <= 0.5):
            raise ValueError(f"zeta must lie in (0, 1/2], got {self.zeta}")
        object.__setattr__(self, "interior", ArcsineInterval(self.alpha, 1.0 - self.alpha))


@dataclass(frozen=True)
class BiasSample:
    p: float
    kind: Kind

    def __post_init__(self):
        if self.kind == Kind.SPECIAL0 and self.p != 0.0:
            raise ValueError("Special0 sample must have p = 0")
        if self.kind == Kind.SPECIAL1 and self.p != 1.0:
            raise ValueError("Special1 sample must have p = 1")

    @property
    def special(self) -> bool:
        return self.kind != Kind.INTERIOR


def arcsine_from_uniform(interval: ArcsineInterval, u):
    """Map uniforms in [0, 1) to ``D_{a,b}`` through the angle substitution."""
    lo, hi = interval.angle_range
    return np.sin(lo + (hi - lo) * np.asarray(u, dtype=float)) ** 2


def sample_arcsine(interval: ArcsineInterval, rng: np.random.Generator) -> float:
    """Draw one ``p`` strictly inside ``(a, b)``."""
    while True:
        p = float(arcsine_from_uniform(interval, rng.random()))
        if interval.a < p < interval.b:
            return p


def arcsine_cdf(interval: ArcsineInterval, p):
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < interval.a) | (p_arr > interval.b)):
        raise ValueError(f"p outside [{interval.a}, {interval.b}]")
    val = (2.0 * np.arcsin(np.sqrt(p_arr)) - 2.0 * math.asin(math.sqrt(interval.a))) * interval.normalizer
    val = np.clip(val, 0.0, 1.0)
    return float(val) if np.ndim(p) == 0 else val


def sample_mixture(mix: BiasMixture, rng: np.random.Generator) -> BiasSample:
    u = rng.random()
    if u < mix.zeta:
        return BiasSample(0.0, Kind.SPECIAL0)
    if u < 2.0 * mix.zeta:
        return BiasSample(1.0, Kind.SPECIAL1)
    return BiasSample(sample_arcsine(mix.interior, rng), Kind.INTERIOR)


def sample_mixture_many(mix: BiasMixture, size: int, rng: np.random.Generator):
    """Vectorised draw of ``size`` biases; returns ``(p, kind)`` arrays.

    Always consumes exactly ``2 * size`` uniforms so the stream layout does not
    depend on which rounds turn out special.
    """
    u_kind = rng.random(size)
    u_angle = rng.random(size)
    kind = np.full(size, Kind.INTERIOR, dtype=np.int8)
    kind[u_kind < mix.zeta] = Kind.SPECIAL0
    kind[(u_kind >= mix.zeta) & (u_kind < 2.0 * mix.zeta)] = Kind.SPECIAL1
    p = arcsine_from_uniform(mix.interior, u_angle)
    # guard the closed endpoints that float rounding can produce
    lo, hi = mix.interior.a, mix.interior.b
    p = np.where(p <= lo, np.nextafter(lo, 1.0), p)
    p = np.where(p >= hi, np.nextafter(hi, 0.0), p)
    p[kind == Kind.SPECIAL0] = 0.0
    p[kind == Kind.SPECIAL1] = 1.0
    return p, kind


def phi(p: float, c: int) -> float:
    """Centred, unit-variance score of bit ``c`` under bias ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if c not in (1, -1):
        raise ValueError(f"c must be +1 or -1, got {c}")
    if p == 0.0 or p == 1.0:
        return 0.0
    if c == 1:
        return math.sqrt((1.0 - p) / p)
    return -math.sqrt(p / (1.0 - p))


def phi_pair(p, kind=None):
    """Return ``(phi^p(+1), phi^p(-1))`` for an array of biases.

    Rounds flagged special by ``kind`` (or with p in {0, 1} when ``kind`` is
    omitted) get zero scores.
    """
    p = np.asarray(p, dtype=float)
    if kind is None:
        special = (p == 0.0) | (p == 1.0)
    else:
        special = np.asarray(kind) != Kind.INTERIOR
    safe = np.where(special, 0.5, p)
    plus = np.sqrt((1.0 - safe) / safe)
    minus = -np.sqrt(safe / (1.0 - safe))
    plus = np.where(special, 0.0, plus)
    minus = np.where(special, 0.0, minus)
    return plus, minus

