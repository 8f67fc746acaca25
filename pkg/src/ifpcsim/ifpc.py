"""Interactive fingerprinting code: parameters, tracer and the game.

The tracer issues one column per round, drawn with a bias ``p`` from the
mixture distribution, receives one +-1 answer from the coalition, adds
``answer * phi^p(c_i)`` to every user's score and accuses every user whose
score exceeds ``sigma``.  Accused coalition members stop seeing columns.
"""
from __future__ import annotations

import base64
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import calibration
from .dist import BiasMixture, BiasSample, Kind, phi_pair, sample_mixture_many
from .pirates import PirateStrategy, PirateView
from .rng import stream

_CHUNK = 4096


class ProtocolError(RuntimeError):
    """Out-of-order tracer calls or illegal pirate answers."""


class Mode(str, enum.Enum):
    PAPER = "paper"
    SCALED = "scaled"


@dataclass(frozen=True)
class IfpcParams:
    N: int
    n: int
    beta: float
    delta: float
    alpha: float
    zeta: float
    sigma: float
    ell: int
    gamma: float
    mode: Mode = Mode.PAPER

    @property
    def mixture(self) -> BiasMixture:
        return BiasMixture(self.alpha, self.zeta)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("N", "n", "beta", "delta", "alpha", "zeta", "sigma", "ell", "gamma")}
        d["mode"] = self.mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IfpcParams":
        d = dict(d)
        d["mode"] = Mode(d.get("mode", "paper"))
        d["N"], d["n"], d["ell"] = int(d["N"]), int(d["n"]), int(d["ell"])
        return cls(**d)

    def replace(self, **changes) -> "IfpcParams":
        d = self.to_dict()
        d.update(changes)
        return IfpcParams.from_dict(d)


def paper_round_factor(n: int, beta: float) -> int:
    """The integer ``ceil(6 pi n / (1/2 - beta)^2)`` shared by sigma and ell."""
    return math.ceil(6.0 * math.pi * n / (0.5 - beta) ** 2)


def derive_params(n: int, N: int, beta: float = 0.0, delta: float = 0.5, mode="paper",
                  sigma: float | None = None, ell: int | None = None) -> IfpcParams:
    """Code parameters for ``N`` users and collusion bound ``n``.

    ``mode="paper"`` uses the construction's constants exactly.  In
    ``mode="scaled"`` alpha, zeta and gamma are unchanged but ``sigma`` and
    ``ell`` come from the overrides, or from the calibrated defaults
    ``ell = c2 n^2``, ``sigma = c1 sqrt(ell ln(1/delta))`` when omitted.
    """
    mode = Mode(mode)
    if not (1 <= n <= N):
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    if not (0.0 <= beta < 0.5):
        raise ValueError(f"beta must lie in [0, 1/2), got {beta}")
    if not (0.0 < delta <= 1.0):
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    alpha = (0.5 - beta) / (4 * n)
    zeta = 3.0 / 8.0 + beta / 4.0
    gamma = (2.0 / math.pi) * (1.0 - 2.0 * zeta) / zeta
    if mode is Mode.PAPER:
        if sigma is not None or ell is not None:
            raise ValueError("sigma/ell overrides are only accepted in scaled mode")
        k = paper_round_factor(n, beta)
        sigma_v = float(64 * k * math.ceil(math.log(32.0 / delta)))
        ell_v = int(k * int(sigma_v))
    else:
        if ell is None or sigma is None:
            c1, c2 = calibration.default_constants(beta, delta)
            if ell is None:
                ell = max(1, math.ceil(c2 * n * n))
            if sigma is None:
                sigma = c1 * math.sqrt(ell * math.log(1.0 / delta)) if delta < 1 else c1 * math.sqrt(ell)
        ell_v = int(ell)
        sigma_v = float(sigma)
        if ell_v < 1:
            raise ValueError("ell must be at least 1")
        if not sigma_v > 0:
            raise ValueError("sigma must be positive")
    return IfpcParams(N=N, n=n, beta=beta, delta=delta, alpha=alpha, zeta=zeta,
                      sigma=sigma_v, ell=ell_v, gamma=gamma, mode=mode)


@dataclass
class RoundTape:
    """All tracer-side randomness of a code: biases and the column bits.

    ``bits[j, i]`` is True when user ``i`` gets +1 in round ``j + 1``.
    """

    p: np.ndarray
    kind: np.ndarray
    bits: np.ndarray

    @property
    def ell(self) -> int:
        return len(self.p)

    def phi_pair(self):
        return phi_pair(self.p, self.kind)

    def column(self, j: int) -> np.ndarray:
        return np.where(self.bits[j], 1, -1).astype(np.int8)

    def sample(self, j: int) -> BiasSample:
        return BiasSample(float(self.p[j]), Kind(int(self.kind[j])))


def draw_rounds(params: IfpcParams, rng: np.random.Generator, N: int | None = None) -> RoundTape:
    """Draw ``p^j`` and ``c^j`` for every round up front."""
    N = params.N if N is None else N
    ell = params.ell
    p, kind = sample_mixture_many(params.mixture, ell, rng)
    bits = np.empty((ell, N), dtype=bool)
    for start in range(0, ell, _CHUNK):
        stop = min(ell, start + _CHUNK)
        np.less(rng.random((stop - start, N)), p[start:stop, None], out=bits[start:stop])
    return RoundTape(p=p, kind=kind, bits=bits)


class TracerState:
    """Round-by-round tracer.

    Call :meth:`next_column` and :meth:`process_answer` alternately.  With
    ``defer_accusations`` the scores are updated every round but accusations
    are only made by :meth:`finalize`.
    """

    def __init__(self, params: IfpcParams, rng=None, tape: RoundTape | None = None,
                 defer_accusations: bool = False):
        self.params = params
        if tape is None:
            if rng is None:
                raise ValueError("need either rng or tape")
            tape = draw_rounds(params, rng)
        if tape.bits.shape != (params.ell, params.N):
            raise ValueError("tape shape does not match params")
        self.tape = tape
        self.defer_accusations = defer_accusations
        self.round = 0
        self.scores = np.zeros(params.N)
        self.accused = np.zeros(params.N, dtype=bool)
        self.accused_round = np.zeros(params.N, dtype=np.int64)
        self._plus, self._minus = tape.phi_pair()
        self._pending = None

    @property
    def accused_set(self) -> frozenset:
        return frozenset(np.flatnonzero(self.accused).tolist())

    def next_column(self):
        if self._pending is not None:
            raise ProtocolError("previous column has not been answered")
        if self.round >= self.params.ell:
            raise ProtocolError(f"all {self.params.ell} rounds already issued")
        j = self.round
        p = self.tape.sample(j)
        column = self.tape.column(j)
        self._pending = (p, column)
        return p, column

    def process_answer(self, p: BiasSample, column, answer: int) -> np.ndarray:
        if self._pending is None:
            raise ProtocolError("process_answer called before next_column")
        if p != self._pending[0] or not np.array_equal(column, self._pending[1]):
            raise ProtocolError("answer does not belong to the issued column")
        if answer not in (1, -1):
            raise ProtocolError(f"answer must be +1 or -1, got {answer!r}")
        j = self.round
        self._pending = None
        inc = np.where(self.tape.bits[j], self._plus[j] * answer, self._minus[j] * answer)
        self.scores += inc
        self.round += 1
        if self.defer_accusations:
            return np.empty(0, dtype=np.int64)
        now = np.flatnonzero((self.scores > self.params.sigma) & ~self.accused)
        self.accused[now] = True
        self.accused_round[now] = self.round
        return now

    def finalize(self) -> np.ndarray:
        """Accuse on the final scores (deferred mode)."""
        if self.round != self.params.ell:
            raise ProtocolError("finalize before the last round")
        now = np.flatnonzero((self.scores > self.params.sigma) & ~self.accused)
        self.accused[now] = True
        self.accused_round[now] = self.round
        return now


@dataclass(frozen=True)
class RoundRecord:
    j: int
    p: BiasSample
    column: np.ndarray
    shown_to: frozenset
    answer: int
    accused_now: frozenset


@dataclass
class Transcript:
    """Full history of one game, kept as arrays.

    ``accused_round[i]`` is the (1-based) round in which user ``i`` was
    accused, or 0 if never.
    """

    params: IfpcParams
    coalition: tuple
    seed: int | None
    p: np.ndarray
    kind: np.ndarray
    bits: np.ndarray
    answers: np.ndarray
    accused_round: np.ndarray
    final_scores: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def ell(self) -> int:
        return len(self.answers)

    @property
    def N(self) -> int:
        return self.bits.shape[1]

    @property
    def accused(self) -> frozenset:
        return frozenset(np.flatnonzero(self.accused_round > 0).tolist())

    def inconsistent_rounds(self) -> np.ndarray:
        """Boolean per round: no user's bit equals the answer."""
        if "inc" not in self._cache:
            plus_count = self.bits.sum(axis=1)
            self._cache["inc"] = np.where(self.answers > 0, plus_count == 0, plus_count == self.N)
        return self._cache["inc"]

    @property
    def theta_trace(self) -> np.ndarray:
        return np.cumsum(self.inconsistent_rounds())

    @property
    def psi_trace(self) -> np.ndarray:
        innocent = np.ones(self.N, dtype=bool)
        innocent[list(self.coalition)] = False
        rounds = self.accused_round[innocent & (self.accused_round > 0)]
        per_round = np.bincount(rounds, minlength=self.ell + 1)[1:]
        return np.cumsum(per_round)

    def shown_to(self, j: int) -> frozenset:
        """``S^j``: coalition members not accused before round ``j``."""
        return frozenset(i for i in self.coalition if not (0 < self.accused_round[i] < j))

    def record(self, j: int) -> RoundRecord:
        k = j - 1
        return RoundRecord(
            j=j,
            p=BiasSample(float(self.p[k]), Kind(int(self.kind[k]))),
            column=np.where(self.bits[k], 1, -1).astype(np.int8),
            shown_to=self.shown_to(j),
            answer=int(self.answers[k]),
            accused_now=frozenset(np.flatnonzero(self.accused_round == j).tolist()),
        )

    @property
    def records(self) -> list:
        return [self.record(j) for j in range(1, self.ell + 1)]


def _check_range(transcript: Transcript, j: int):
    if not (1 <= j <= transcript.ell):
        raise ValueError(f"round {j} outside 1..{transcript.ell}")


def inconsistency_count(transcript: Transcript, j: int) -> int:
    """theta^j: rounds k <= j in which no user's bit equals the answer."""
    _check_range(transcript, j)
    bits = transcript.bits[:j]
    ans_plus = transcript.answers[:j] > 0
    matches = np.where(ans_plus[:, None], bits, ~bits).any(axis=1)
    return int((~matches).sum())


def false_accusations(transcript: Transcript, j: int) -> int:
    """psi^j: users accused by round j that are outside the coalition."""
    _check_range(transcript, j)
    accused = set(np.flatnonzero((transcript.accused_round > 0) & (transcript.accused_round <= j)).tolist())
    return len(accused - set(transcript.coalition))


@dataclass(frozen=True)
class GameOutcome:
    theta: int
    psi: int
    completeness_holds: bool
    soundness_holds: bool
    tracer_wins: bool
    coalition_fully_accused: bool


def judge(theta: int, psi: int, ell: int, N: int, coalition_size: int, beta: float, delta: float,
          fully_accused: bool) -> GameOutcome:
    completeness = theta > beta * ell
    soundness = psi <= delta * (N - coalition_size)
    return GameOutcome(theta=int(theta), psi=int(psi), completeness_holds=bool(completeness),
                       soundness_holds=bool(soundness), tracer_wins=bool(completeness and soundness),
                       coalition_fully_accused=bool(fully_accused))


def evaluate_outcome(transcript: Transcript, params: IfpcParams | None = None) -> GameOutcome:
    params = transcript.params if params is None else params
    ell = transcript.ell
    theta = inconsistency_count(transcript, ell)
    psi = false_accusations(transcript, ell)
    fully = set(transcript.coalition) <= transcript.accused
    return judge(theta, psi, ell, transcript.N, len(transcript.coalition), params.beta, params.delta, fully)


def _check_answers(a, j0):
    a = np.asarray(a)
    bad = np.flatnonzero((a != 1) & (a != -1))
    if bad.size:
        raise ProtocolError(f"pirate answered {a[bad[0]]!r} in round {j0 + bad[0] + 1}; answers must be +-1")
    return a.astype(np.int8)


def _run_rounds(params, tape, coalition, pirate):
    tracer = TracerState(params, tape=tape)
    answers = np.empty(params.ell, dtype=np.int8)
    members = list(coalition)
    for j in range(1, params.ell + 1):
        p, column = tracer.next_column()
        visible = [i for i in members if not tracer.accused[i]]
        view = PirateView(j, visible, column[visible])
        a = pirate.respond(view)
        if a not in (1, -1):
            raise ProtocolError(f"pirate answered {a!r} in round {j}; answers must be +-1")
        answers[j - 1] = a
        tracer.process_answer(p, column, int(a))
    return answers, tracer.accused_round.copy(), tracer.scores.copy()


def _run_segments(params, tape, coalition, pirate, window=_CHUNK):
    """Answers for the whole game, evaluated in blocks of rounds.

    Inside a block the visible set only changes after the first round in
    which some visible member crosses the threshold, so answers are computed
    for the block, cut at that round, and the block restarts.
    """
    ell, sigma = params.ell, params.sigma
    members = np.asarray(coalition, dtype=np.int64)
    plus, minus = tape.phi_pair()
    bits_s = tape.bits[:, members]
    col_s = np.where(bits_s, 1, -1).astype(np.int8)
    phi_s = np.where(bits_s, plus[:, None], minus[:, None])
    answers = np.empty(ell, dtype=np.int8)
    score_s = np.zeros(len(members))
    active = np.ones(len(members), dtype=bool)
    j0 = 0
    while j0 < ell:
        j1 = min(ell, j0 + window)
        vis = np.flatnonzero(active)
        rounds = np.arange(j0 + 1, j1 + 1)
        a = _check_answers(pirate.respond_block(members[vis], col_s[j0:j1][:, vis], rounds), j0)
        if vis.size == 0:
            answers[j0:j1] = a
            j0 = j1
            continue
        inc = a[:, None] * phi_s[j0:j1][:, vis]
        traj = np.cumsum(np.vstack([score_s[vis][None, :], inc]), axis=0)[1:]
        cross = traj > sigma
        hit_rows = np.flatnonzero(cross.any(axis=1))
        if hit_rows.size == 0:
            answers[j0:j1] = a
            score_s[vis] = traj[-1]
            j0 = j1
            continue
        r = hit_rows[0]
        answers[j0:j0 + r + 1] = a[:r + 1]
        score_s[vis] = traj[r]
        active[vis[cross[r]]] = False
        j0 += r + 1
    return answers


def score_pass(tape: RoundTape, answers: np.ndarray, sigma: float):
    """Accusation rounds and final scores for every user, given the answers.

    Scores are accumulated strictly left to right (``cumsum`` with a carried
    row), which matches the round-by-round tracer bit for bit.
    """
    ell, N = tape.bits.shape
    plus, minus = tape.phi_pair()
    a = answers.astype(float)
    plus_a, minus_a = plus * a, minus * a
    carry = np.zeros(N)
    accused_round = np.zeros(N, dtype=np.int64)
    for start in range(0, ell, _CHUNK):
        stop = min(ell, start + _CHUNK)
        inc = np.where(tape.bits[start:stop], plus_a[start:stop, None], minus_a[start:stop, None])
        block = np.empty((stop - start + 1, N))
        block[0] = carry
        block[1:] = inc
        np.cumsum(block, axis=0, out=block)
        cross = block[1:] > sigma
        hit = cross.any(axis=0) & (accused_round == 0)
        if hit.any():
            first = cross[:, hit].argmax(axis=0)
            accused_round[hit] = start + first + 1
        carry = block[-1].copy()
    return accused_round, carry


def run_game(params: IfpcParams, coalition, pirate: PirateStrategy, rng=None, *, seed: int | None = None,
             engine: str = "segments") -> Transcript:
    """Play all ``ell`` rounds of the game against ``pirate``.

    Randomness comes from ``seed`` (recorded in the transcript for replay) or
    from an explicit ``rng``.  ``engine="rounds"`` drives a
    :class:`TracerState` one round at a time; ``engine="segments"`` computes
    the same transcript with block evaluation of the pirate.  Block
    evaluation may look ahead past an accusation and discard those answers,
    which is only harmless for strategies that are pure functions of
    (view, round).  Strategies without their own ``respond_block`` are
    therefore always played round by round.
    """
    coalition = tuple(sorted(int(i) for i in coalition))
    if len(set(coalition)) != len(coalition):
        raise ValueError("coalition has repeated users")
    if coalition and not (0 <= coalition[0] and coalition[-1] < params.N):
        raise ValueError("coalition member outside [0, N)")
    if seed is None and rng is None:
        raise ValueError("need a seed or an rng")
    if seed is not None:
        tracer_rng, pirate_rng = stream(seed, "tracer"), stream(seed, "pirate")
    else:
        tracer_rng, pirate_rng = stream(rng, "tracer"), stream(rng, "pirate")
    tape = draw_rounds(params, tracer_rng)
    pirate.reset(params.ell, pirate_rng)
    if engine == "segments" and type(pirate).respond_block is PirateStrategy.respond_block:
        engine = "rounds"
    if engine == "rounds":
        answers, accused_round, scores = _run_rounds(params, tape, coalition, pirate)
    elif engine == "segments":
        answers = _run_segments(params, tape, coalition, pirate)
        accused_round, scores = score_pass(tape, answers, params.sigma)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return Transcript(params=params, coalition=coalition, seed=seed, p=tape.p, kind=tape.kind,
                      bits=tape.bits, answers=answers, accused_round=accused_round, final_scores=scores)


# --- JSONL serialisation -------------------------------------------------------

def _pack(bits_row: np.ndarray) -> str:
    return base64.b64encode(np.packbits(bits_row).tobytes()).decode("ascii")


def _unpack(text: str, N: int) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(text), dtype=np.uint8)
    return np.unpackbits(raw)[:N].astype(bool)


def write_transcript(transcript: Transcript, path) -> None:
    """One header object, then one object per round."""
    path = Path(path)
    header = {"params": transcript.params.to_dict(), "N": transcript.N,
              "coalition": list(transcript.coalition), "seed": transcript.seed}
    with path.open("w") as fh:
        fh.write(json.dumps(header) + "\n")
        for j in range(1, transcript.ell + 1):
            k = j - 1
            rec = {
                "j": j,
                "p": float(transcript.p[k]),
                "kind": Kind(int(transcript.kind[k])).name,
                "column": _pack(transcript.bits[k]),
                "shown_to": sorted(transcript.shown_to(j)),
                "answer": int(transcript.answers[k]),
                "accused_now": np.flatnonzero(transcript.accused_round == j).tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def read_transcript(path) -> Transcript:
    with Path(path).open() as fh:
        header = json.loads(fh.readline())
        params = IfpcParams.from_dict(header["params"])
        N = int(header["N"])
        recs = [json.loads(line) for line in fh if line.strip()]
    ell = len(recs)
    p = np.array([r["p"] for r in recs], dtype=float)
    kind = np.array([Kind[r["kind"]] for r in recs], dtype=np.int8)
    bits = np.array([_unpack(r["column"], N) for r in recs], dtype=bool).reshape(ell, N)
    answers = np.array([r["answer"] for r in recs], dtype=np.int8)
    accused_round = np.zeros(N, dtype=np.int64)
    for r in recs:
        for i in r["accused_now"]:
            accused_round[i] = r["j"]
    tape = RoundTape(p, kind, bits)
    _, scores = score_pass(tape, answers, params.sigma)
    return Transcript(params=params, coalition=tuple(header["coalition"]), seed=header["seed"], p=p,
                      kind=kind, bits=bits, answers=answers, accused_round=accused_round, final_scores=scores)
