"""Reconstruction attacks that drive the fingerprinting tracer through an SQ oracle.

Every round the tracer's column is encrypted user by user and the query
``q(i', sk') = Dec(sk', ct_{i'})`` (0 for already accused users) is sent to
the oracle.  The rounded answer goes back to the tracer as the pirate's
answer.  Users whose records sit in the oracle's sample play the coalition.

In the ideal variants every user outside the sample gets an encryption of 0
instead of its bit.  Both variants consume randomness identically, so with
the same seed they differ only in the ciphertexts of non-sample users.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ifpc
from .crypto import EncryptionScheme
from .ifpc import IfpcParams, Mode, TracerState, Transcript, draw_rounds
from .rng import stream
from .sq import (RecordSample, SqOracle, StatQuery, Universe, accuracy_check, checked_answer,
                 column_population_value, make_universe, sample_accuracy_check)

PAPER_UNIVERSE_FACTOR = 2000
PAPER_ATTACK_DELTA = 1 / 1000
PAPER_PRIVACY_DELTA = 1 / 20000
DEFAULT_UNIVERSE_FACTOR = 10
MIN_EXPECTED_FALSE = 5
KEY_BITS = 32
HALT_FRACTION = 499 / 500


def default_record_length(N: int, key_bits: int = KEY_BITS) -> int:
    return math.ceil(math.log2(N)) + key_bits


def attack_params(n: int, beta: float = 0.0, delta: float | None = None, mode="scaled",
                  universe_factor: int | None = None, sigma=None, ell=None) -> IfpcParams:
    """Code parameters for the attack universe of ``N = factor * n`` users.

    Paper mode fixes ``N = 2000 n`` and ``delta = 1/1000``.  Scaled mode
    defaults to ``N = 10 n`` and raises delta until ``delta (N - n) >= 5``.
    """
    mode = Mode(mode)
    if mode is Mode.PAPER:
        factor = PAPER_UNIVERSE_FACTOR if universe_factor is None else universe_factor
        N = factor * n
        return ifpc.derive_params(n, N, beta, PAPER_ATTACK_DELTA if delta is None else delta, mode)
    factor = DEFAULT_UNIVERSE_FACTOR if universe_factor is None else universe_factor
    N = factor * n
    delta = 0.1 if delta is None else delta
    delta = min(1.0, max(delta, MIN_EXPECTED_FALSE / (N - n))) if N > n else delta
    return ifpc.derive_params(n, N, beta, delta, mode, sigma=sigma, ell=ell)


def privacy_params(n: int, beta: float = 0.0, delta: float | None = None, mode="scaled",
                   sigma=None, ell=None) -> IfpcParams:
    """Code parameters for the privacy attack on a universe of ``2n`` records.

    Scaled mode uses ``delta = 1/(2n)``, so the soundness bound
    ``delta (N - n) = 1/2`` allows no false accusation at all.
    """
    mode = Mode(mode)
    if mode is Mode.PAPER:
        return ifpc.derive_params(n, 2 * n, beta, PAPER_PRIVACY_DELTA if delta is None else delta, mode)
    delta = 1.0 / (2 * n) if delta is None else delta
    return ifpc.derive_params(n, 2 * n, beta, delta, mode, sigma=sigma, ell=ell)


@dataclass
class AttackReport:
    params: IfpcParams
    d: int
    mode: str
    scheme: str
    oracle: str
    seed: int | None
    sample: RecordSample
    transcript: Transcript
    answers: np.ndarray
    population: np.ndarray
    sample_values: np.ndarray
    guard_triggered: bool = False

    @property
    def n(self) -> int:
        return len(self.sample)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def S(self) -> frozenset:
        return self.sample.distinct

    @property
    def T(self) -> frozenset:
        return self.transcript.accused

    @property
    def L(self) -> int:
        return self.transcript.ell

    @property
    def rounded(self) -> np.ndarray:
        return self.transcript.answers

    @property
    def theta_ell(self) -> int:
        return int(self.transcript.theta_trace[-1]) if self.L else 0

    @property
    def psi_ell(self) -> int:
        return len(self.T - self.S)

    @property
    def recovered_fraction(self) -> float:
        return len(self.S & self.T) / len(self.S) if self.S else 1.0

    @property
    def sample_recovered(self) -> bool:
        return self.S <= self.T

    @property
    def soundness_holds(self) -> bool:
        return self.psi_ell <= self.params.delta * (self.N - len(self.S))

    def accurate(self, alpha_acc: float = 0.99, beta: float | None = None) -> bool:
        return accuracy_check(self, alpha_acc, self.params.beta if beta is None else beta)

    def sample_accurate(self, alpha_acc: float = 0.99, beta: float | None = None) -> bool:
        return sample_accuracy_check(self, alpha_acc, self.params.beta if beta is None else beta)

    def summary(self) -> dict:
        return {"n": self.n, "N": self.N, "d": self.d, "mode": self.mode, "theta_ell": self.theta_ell,
                "psi_ell": self.psi_ell, "recovered_fraction": self.recovered_fraction, "sym_diff": None}

    def write_json(self, path, transcript_path=None) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        if transcript_path is not None:
            ifpc.write_transcript(self.transcript, transcript_path)


@dataclass
class PrivacyReport(AttackReport):
    halted_early: bool = False

    @property
    def x(self) -> frozenset:
        return self.S

    @property
    def x_prime(self) -> frozenset:
        return self.T

    @property
    def sym_diff(self) -> int:
        return len(self.x ^ self.x_prime)

    def set_identity_holds(self) -> bool:
        """``|x ^ x'| = |x| - |x'| + 2 |x' - x|``."""
        x, xp = self.x, self.x_prime
        return len(x ^ xp) == len(x) - len(xp) + 2 * len(xp - x)

    def summary(self) -> dict:
        out = super().summary()
        out["sym_diff"] = self.sym_diff
        out["halted_early"] = self.halted_early
        return out


def blatant_nonprivacy_metric(x, x_prime, n: int) -> tuple[int, bool]:
    """Size of ``x ^ x'`` and whether it is at most ``n/100``."""
    size = len(frozenset(x) ^ frozenset(x_prime))
    return size, size <= n / 100


@dataclass
class _Streams:
    tracer: np.random.Generator
    keys: np.random.Generator
    sample: np.random.Generator
    enc: np.random.Generator
    oracle: np.random.Generator
    seed: int | None = field(default=None)


def _streams(rng) -> _Streams:
    if isinstance(rng, np.random.Generator):
        return _Streams(*(stream(rng, r) for r in ("tracer", "keys", "sample", "enc", "oracle")))
    seed = int(rng)
    return _Streams(*(stream(seed, r) for r in ("tracer", "keys", "sample", "enc", "oracle")), seed=seed)


def _play(params: IfpcParams, d: int, scheme: EncryptionScheme, oracle: SqOracle, rng, *, ideal: bool,
          privacy: bool, verify: bool):
    st = _streams(rng)
    N = params.N
    tape = draw_rounds(params, st.tracer)
    universe: Universe = make_universe(d, N, scheme, st.keys)
    if privacy:
        sample = universe.sample_subset(params.n, st.sample)
    else:
        sample = universe.sample_iid(params.n, st.sample)
    in_sample = np.zeros(N, dtype=bool)
    in_sample[sample.indices] = True
    messages = np.where(tape.bits, 1, -1).astype(np.int8)
    if ideal:
        messages[:, ~in_sample] = 0
    table = scheme.enc_table(universe.keys, messages, st.enc)
    everyone = universe.sample_of(np.arange(N)) if verify else None

    tracer = TracerState(params, tape=tape)
    oracle.init(sample, st.oracle)
    excluded = np.zeros(N, dtype=bool)
    cache = {id(s): [s, None] for s in (sample, everyone) if s is not None}
    n_rec = len(sample)
    answers, given, pop, samp = [], [], [], []
    L, guard, halted = params.ell, False, False
    for j in range(1, params.ell + 1):
        n_out = int(excluded.sum())
        if privacy and n_out >= n_rec:
            guard, L = True, j - 1
            break
        p, column = tracer.next_column()
        q = StatQuery(scheme, table, j - 1, excluded.copy(), _cache=cache)
        a = checked_answer(oracle, q, j)
        answers.append(a)
        pop.append(column_population_value(column, excluded))
        samp.append(float(q.evaluate_many(sample).mean()))
        if verify:
            _verify_round(q, everyone, messages[j - 1], excluded, pop[-1], j)
        scaled = a * n_rec / (n_rec - n_out) if privacy else a
        given.append(1 if scaled >= 0 else -1)
        tracer.process_answer(p, column, given[-1])
        excluded = tracer.accused.copy()
        if privacy and excluded.sum() > HALT_FRACTION * n_rec:
            L, halted = j, j < params.ell
            break
    transcript = Transcript(
        params=params, coalition=tuple(sorted(sample.distinct)), seed=st.seed,
        p=tape.p[:L], kind=tape.kind[:L], bits=tape.bits[:L],
        answers=np.array(given[:L], dtype=np.int8),
        accused_round=tracer.accused_round.copy(), final_scores=tracer.scores.copy())
    fields_ = dict(params=params, d=d, mode="ideal" if ideal else "real", scheme=scheme.name, oracle=oracle.spec,
                   seed=st.seed, sample=sample, transcript=transcript, answers=np.array(answers[:L]),
                   population=np.array(pop[:L]), sample_values=np.array(samp[:L]), guard_triggered=guard)
    if privacy:
        return PrivacyReport(**fields_, halted_early=halted)
    return AttackReport(**fields_)


def _verify_round(q, everyone, plain, excluded, pop, j):
    vals = q.evaluate_many(everyone)
    expect = np.where(excluded, 0, plain)
    if not np.array_equal(vals, expect):
        raise AssertionError(f"query evaluation disagrees with plaintext in round {j}")
    if float(vals.mean()) != pop:
        raise AssertionError(f"population value mismatch in round {j}")


def run_attack(oracle: SqOracle, n: int, d: int, ifpc_params: IfpcParams, scheme: EncryptionScheme, rng,
               *, verify: bool = False) -> AttackReport:
    """Real attack: every user's true bit is encrypted."""
    _check_setup(n, d, ifpc_params)
    return _play(ifpc_params, d, scheme, oracle, rng, ideal=False, privacy=False, verify=verify)


def run_ideal_attack(oracle: SqOracle, n: int, d: int, ifpc_params: IfpcParams, scheme: EncryptionScheme, rng,
                     *, verify: bool = False) -> AttackReport:
    """Ideal attack: users outside the sample get encryptions of 0."""
    _check_setup(n, d, ifpc_params)
    return _play(ifpc_params, d, scheme, oracle, rng, ideal=True, privacy=False, verify=verify)


def run_privacy_attack(oracle: SqOracle, n: int, d: int, ifpc_params: IfpcParams, scheme: EncryptionScheme,
                       rng, *, verify: bool = False) -> PrivacyReport:
    """Reconstruct a random ``n``-subset of ``2n`` records.

    Answers are rescaled by ``n / (n - |T|)`` before rounding, and the attack
    stops once more than ``499 n / 500`` users are accused.
    """
    _check_setup(n, d, ifpc_params)
    if ifpc_params.N != 2 * n:
        raise ValueError(f"privacy attack needs N = 2n = {2 * n}, got {ifpc_params.N}")
    return _play(ifpc_params, d, scheme, oracle, rng, ideal=False, privacy=True, verify=verify)


def run_ideal_privacy_attack(oracle: SqOracle, n: int, d: int, ifpc_params: IfpcParams, scheme: EncryptionScheme,
                             rng, *, verify: bool = False) -> PrivacyReport:
    _check_setup(n, d, ifpc_params)
    if ifpc_params.N != 2 * n:
        raise ValueError(f"privacy attack needs N = 2n = {2 * n}, got {ifpc_params.N}")
    return _play(ifpc_params, d, scheme, oracle, rng, ideal=True, privacy=True, verify=verify)


def _check_setup(n: int, d: int, params: IfpcParams):
    if n != params.n:
        raise ValueError(f"sample size n={n} differs from the code's collusion bound {params.n}")
    if d < 1 + math.ceil(math.log2(params.N)):
        raise ValueError(f"record length d={d} too small for N={params.N}")
