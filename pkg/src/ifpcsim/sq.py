"""Statistical-query model: universes, samples, queries and answerers.

An oracle holds a sample of ``n`` records and answers each query with a value
in ``[-1, 1]`` meant to approximate the query's population mean.  Attack
queries are data objects (a ciphertext row plus an excluded set) rather than
code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .crypto import CipherTable, EncryptionScheme, KeyRing


@dataclass
class Universe:
    """Records ``y_i = (i, sk_i)``; the distribution is uniform over them."""

    d: int
    N: int
    scheme: EncryptionScheme
    keys: KeyRing

    @property
    def index_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.N))) if self.N > 1 else 1

    @property
    def lam(self) -> int:
        return key_length(self.d, self.N)

    def record(self, i: int):
        return i, self.keys[i]

    def sample_iid(self, n: int, rng: np.random.Generator) -> "RecordSample":
        return self.sample_of(rng.integers(0, self.N, size=n))

    def sample_subset(self, n: int, rng: np.random.Generator) -> "RecordSample":
        return self.sample_of(np.sort(rng.choice(self.N, size=n, replace=False)))

    def sample_of(self, idx) -> "RecordSample":
        idx = np.asarray(idx, dtype=np.int64)
        return RecordSample(idx, self.keys.take(idx))


def key_length(d: int, N: int) -> int:
    """``lambda = d - ceil(log2 N)``; must be at least 1."""
    lam = d - math.ceil(math.log2(N))
    if lam < 1:
        raise ValueError(f"record length d={d} leaves no key bits for N={N}; need d >= 1 + ceil(log2 N)")
    return lam


def make_universe(d: int, N: int, scheme: EncryptionScheme, rng: np.random.Generator) -> Universe:
    lam = key_length(d, N)
    return Universe(d=d, N=N, scheme=scheme, keys=scheme.gen_keys(N, lam, rng))


@dataclass
class RecordSample:
    """A batch of attack records: user indices and their keys, row-aligned."""

    indices: np.ndarray
    keys: KeyRing

    def __len__(self):
        return len(self.indices)

    def __getitem__(self, r):
        return int(self.indices[r]), self.keys[r]

    def subset(self, rows) -> "RecordSample":
        rows = np.asarray(rows, dtype=np.int64)
        return RecordSample(self.indices[rows], self.keys.take(rows))

    @property
    def distinct(self) -> frozenset:
        return frozenset(self.indices.tolist())


@dataclass
class StatQuery:
    """``q(i', sk') = Dec(sk', ct_{i'})`` if ``i'`` is not excluded, else 0."""

    scheme: EncryptionScheme
    table: CipherTable
    row: int
    excluded: np.ndarray
    _log: list | None = field(default=None, repr=False)
    # shared across the rounds of one game; only samples registered as
    # id(sample) -> [sample, None] get all their rows decrypted in one pass
    _cache: dict | None = field(default=None, repr=False)

    def evaluate(self, record) -> int:
        i, key = record
        if self._log is not None:
            self._log.append(int(i))
        if self.excluded[i]:
            return 0
        return self.scheme.dec(key, self.table.entry(self.row, i))

    def evaluate_many(self, sample: RecordSample) -> np.ndarray:
        idx = sample.indices
        if self._log is not None:
            self._log.extend(idx.tolist())
        hit = None if self._cache is None else self._cache.get(id(sample))
        if hit is None or hit[0] is not sample:
            vals = self.scheme.dec_many(sample.keys, self.table.tag[self.row, idx], self.table.body[self.row, idx])
        else:
            if hit[1] is None:
                hit[1] = self.scheme.dec_many(sample.keys, self.table.tag[:, idx], self.table.body[:, idx])
            vals = hit[1][self.row]
        return np.where(self.excluded[idx], 0, vals).astype(np.int8)


@dataclass
class FunctionQuery:
    """A query given as a plain function of a record."""

    fn: Callable

    def evaluate(self, record) -> float:
        return float(self.fn(record))

    def evaluate_many(self, sample) -> np.ndarray:
        return np.array([self.fn(x) for x in sample], dtype=float)


@dataclass
class FiniteDistribution:
    records: Sequence
    weights: np.ndarray | None = None

    def __post_init__(self):
        k = len(self.records)
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (k,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("weights must be a probability vector over the records")
        self.weights = w

    def sample(self, n: int, rng: np.random.Generator) -> list:
        idx = rng.choice(len(self.records), size=n, p=self.weights)
        return [self.records[i] for i in idx]

    def mean(self, query) -> float:
        return float(np.dot(self.weights, query.evaluate_many(self.records)))


# --- oracles ----------------------------------------------------------------

class SqOracle:
    name = "oracle"

    def init(self, sample, rng: np.random.Generator) -> None:
        self.sample = sample
        self.rng = rng

    def answer(self, query) -> float:
        raise NotImplementedError

    @property
    def spec(self) -> str:
        return self.name


class EmpiricalMean(SqOracle):
    name = "empirical_mean"

    def answer(self, query):
        return float(query.evaluate_many(self.sample).mean())


class GaussianNoise(SqOracle):
    name = "gaussian_noise"

    def __init__(self, noise_sd: float):
        if noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        self.noise_sd = float(noise_sd)

    def answer(self, query):
        mean = float(query.evaluate_many(self.sample).mean())
        return float(np.clip(mean + self.noise_sd * self.rng.standard_normal(), -1.0, 1.0))

    @property
    def spec(self):
        return f"gaussian_noise:{self.noise_sd:g}"


class Subsample(SqOracle):
    """Mean over a fixed random ``t``-subset of the sample."""

    name = "subsample"

    def __init__(self, t: int):
        if t < 1:
            raise ValueError("subsample size must be positive")
        self.t = int(t)

    def init(self, sample, rng):
        super().init(sample, rng)
        if self.t > len(sample):
            raise ValueError(f"subsample size {self.t} exceeds sample size {len(sample)}")
        rows = np.sort(rng.choice(len(sample), size=self.t, replace=False))
        self.sub = sample.subset(rows) if isinstance(sample, RecordSample) else [sample[r] for r in rows]

    def answer(self, query):
        return float(np.mean(query.evaluate_many(self.sub)))

    @property
    def spec(self):
        return f"subsample:{self.t}"


class ConstantAnswer(SqOracle):
    name = "constant"

    def __init__(self, v: float):
        if not -1.0 <= v <= 1.0:
            raise ValueError("constant answer must lie in [-1, 1]")
        self.v = float(v)

    def answer(self, query):
        return self.v

    @property
    def spec(self):
        return f"constant:{self.v:g}"


def empirical_mean_oracle() -> EmpiricalMean:
    return EmpiricalMean()


def gaussian_noise_oracle(noise_sd: float) -> GaussianNoise:
    return GaussianNoise(noise_sd)


def subsample_oracle(t: int) -> Subsample:
    return Subsample(t)


def constant_oracle(v: float) -> ConstantAnswer:
    return ConstantAnswer(v)


BUILTIN_ORACLES = ("empirical_mean", "gaussian_noise", "subsample", "constant")


def parse_oracle(spec: str) -> SqOracle:
    name, _, arg = spec.partition(":")
    name = name.strip().replace("-", "_")
    if name == "empirical_mean":
        return EmpiricalMean()
    if name == "gaussian_noise":
        return GaussianNoise(float(arg) if arg else 1.0)
    if name == "subsample":
        if not arg:
            raise ValueError("subsample needs a size, e.g. subsample:4")
        return Subsample(int(arg))
    if name == "constant":
        return ConstantAnswer(float(arg) if arg else 1.0)
    raise ValueError(f"unknown oracle {spec!r}")


def checked_answer(oracle: SqOracle, query, j: int) -> float:
    try:
        a = float(oracle.answer(query))
    except Exception as exc:
        raise RuntimeError(f"oracle {oracle.spec} failed in round {j}: {exc}") from exc
    if not -1.0 <= a <= 1.0 or math.isnan(a):
        raise ValueError(f"oracle {oracle.spec} answered {a} in round {j}; answers must lie in [-1, 1]")
    return a


# --- accuracy game ------------------------------------------------------------

@dataclass
class AccTranscript:
    """Answers alongside the population and sample values of each query."""

    answers: np.ndarray
    population: np.ndarray
    sample_values: np.ndarray
    queries: list = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return len(self.answers)


def run_acc_game(oracle: SqOracle, analyst, n: int, d: int, k: int, rng: np.random.Generator) -> AccTranscript:
    """Figure-3 style game.

    ``analyst`` provides ``distribution`` (a :class:`FiniteDistribution`) and
    ``query(j, history)`` returning the ``j``-th query given past answers.
    ``d`` is the record length and is only used by analysts that need it.
    """
    dist = analyst.distribution
    sample = dist.sample(n, rng)
    oracle.init(sample, rng)
    answers, pop, samp, queries = [], [], [], []
    for j in range(1, k + 1):
        q = analyst.query(j, list(answers))
        a = checked_answer(oracle, q, j)
        answers.append(a)
        pop.append(dist.mean(q))
        samp.append(float(np.mean(q.evaluate_many(sample))))
        queries.append(q)
    return AccTranscript(np.array(answers), np.array(pop), np.array(samp), queries)


def _accurate_enough(errors: np.ndarray, alpha_acc: float, beta: float) -> bool:
    bad = int((np.abs(errors) > alpha_acc).sum())
    return bad <= beta * len(errors) + 1e-12


def accuracy_check(transcript, alpha_acc: float, beta: float) -> bool:
    """At least ``(1 - beta) k`` answers within ``alpha_acc`` of the population value."""
    return _accurate_enough(np.asarray(transcript.answers) - np.asarray(transcript.population), alpha_acc, beta)


def sample_accuracy_check(transcript, alpha_acc: float, beta: float) -> bool:
    """As :func:`accuracy_check`, against the sample mean of each query."""
    return _accurate_enough(np.asarray(transcript.answers) - np.asarray(transcript.sample_values), alpha_acc, beta)


def population_value(query, universe: Universe) -> float:
    """Exact population mean ``q(D)``: the query averaged over every record."""
    everyone = universe.sample_of(np.arange(universe.N))
    return float(query.evaluate_many(everyone).mean())


def column_population_value(column, excluded) -> float:
    """The same value from plaintext: ``(1/N) sum_{i not in T} c_i``."""
    c = np.asarray(column, dtype=float)
    ex = np.zeros(len(c), dtype=bool)
    ex_in = np.asarray(excluded)
    if ex_in.dtype == bool:
        ex |= ex_in
    elif ex_in.size:
        ex[ex_in.astype(np.int64)] = True
    return float(c[~ex].sum() / len(c))
