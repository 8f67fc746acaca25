"""Coalition strategies for the interactive fingerprinting game.

A strategy only ever sees a :class:`PirateView`: the column bits of the
coalition members that have not been accused yet.  Randomised strategies draw
all of their per-round randomness in :meth:`PirateStrategy.reset`, so an
answer is a pure function of (view, round).  That lets the game runner
evaluate a strategy one round at a time or over a block of rounds and get the
same answers either way.
"""
from __future__ import annotations

from collections.abc import Mapping

import numpy as np


class ViewAccessError(KeyError):
    """Raised when a strategy asks for a bit outside its view."""


class PirateView(Mapping):
    """Read-only ``{user: bit}`` map for one round."""

    __slots__ = ("round", "_members", "_bits")

    def __init__(self, round: int, members, bits):
        self.round = int(round)
        self._members = tuple(int(i) for i in members)
        self._bits = tuple(int(b) for b in bits)
        if len(self._members) != len(self._bits):
            raise ValueError("members and bits differ in length")

    def __getitem__(self, user):
        try:
            return self._bits[self._members.index(user)]
        except ValueError:
            raise ViewAccessError(f"user {user} is not visible in round {self.round}") from None

    def __iter__(self):
        return iter(self._members)

    def __len__(self):
        return len(self._members)

    def __repr__(self):
        return f"PirateView(round={self.round}, visible={dict(self)})"


def _sign(x):
    """Sign with ties sent to +1."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


class PirateStrategy:
    """Base class.  Subclasses implement :meth:`respond` and, for speed,
    :meth:`respond_block`."""

    name = "pirate"

    def reset(self, ell: int, rng: np.random.Generator) -> None:
        """Prepare for a game of ``ell`` rounds."""

    def respond(self, view: PirateView) -> int:
        raise NotImplementedError

    def respond_block(self, members: np.ndarray, bits: np.ndarray, rounds: np.ndarray) -> np.ndarray:
        """Answers for consecutive rounds with a fixed visible set.

        ``bits`` has shape ``(len(rounds), len(members))`` with entries +-1.
        The default falls back to :meth:`respond` round by round.
        """
        out = np.empty(len(rounds), dtype=np.int64)
        for r, j in enumerate(rounds):
            out[r] = self.respond(PirateView(int(j), members, bits[r]))
        return out

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec}>"

    @property
    def spec(self) -> str:
        return self.name


class Dictator(PirateStrategy):
    """Echo one fixed member's bit; answer +1 once that member is gone."""

    name = "dictator"

    def __init__(self, i_star: int):
        self.i_star = int(i_star)

    def respond(self, view):
        if self.i_star in view:
            return view[self.i_star]
        return 1

    def respond_block(self, members, bits, rounds):
        hit = np.flatnonzero(np.asarray(members) == self.i_star)
        if hit.size:
            return bits[:, hit[0]].astype(np.int64)
        return np.ones(len(rounds), dtype=np.int64)

    @property
    def spec(self):
        return f"dictator:{self.i_star}"


class Majority(PirateStrategy):
    """Sign of the visible bit sum; ties and empty views give +1."""

    name = "majority"

    def respond(self, view):
        return 1 if sum(view.values()) >= 0 else -1

    def respond_block(self, members, bits, rounds):
        if bits.shape[1] == 0:
            return np.ones(len(rounds), dtype=np.int64)
        return _sign(bits.sum(axis=1)).astype(np.int64)


class RandomConsistent(PirateStrategy):
    """Echo the bit of a uniformly chosen visible member (uniform +-1 when
    nobody is visible)."""

    name = "random_consistent"

    def __init__(self):
        self._u = None

    def reset(self, ell, rng):
        self._u = rng.random(ell)

    def _require(self):
        if self._u is None:
            raise RuntimeError("reset() must be called before responding")

    def respond(self, view):
        self._require()
        u = self._u[view.round - 1]
        if len(view) == 0:
            return 1 if u < 0.5 else -1
        members = list(view)
        return view[members[int(u * len(members))]]

    def respond_block(self, members, bits, rounds):
        self._require()
        u = self._u[np.asarray(rounds) - 1]
        k = bits.shape[1]
        if k == 0:
            return np.where(u < 0.5, 1, -1).astype(np.int64)
        pick = (u * k).astype(np.int64)
        return bits[np.arange(len(rounds)), pick].astype(np.int64)


class Constant(PirateStrategy):
    name = "constant"

    def __init__(self, b: int = 1):
        if b not in (1, -1):
            raise ValueError("constant answer must be +1 or -1")
        self.b = int(b)

    def respond(self, view):
        return self.b

    def respond_block(self, members, bits, rounds):
        return np.full(len(rounds), self.b, dtype=np.int64)

    @property
    def spec(self):
        return f"constant:{self.b:+d}"


class NoisyMean(PirateStrategy):
    """Sign of (visible mean + N(0, noise_scale^2)); empty views answer
    uniformly."""

    name = "noisy_mean"

    def __init__(self, noise_scale: float):
        if noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        self.noise_scale = float(noise_scale)
        self._z = None
        self._u = None

    def reset(self, ell, rng):
        self._z = rng.standard_normal(ell)
        self._u = rng.random(ell)

    def respond(self, view):
        if self._z is None:
            raise RuntimeError("reset() must be called before responding")
        j = view.round - 1
        if len(view) == 0:
            return 1 if self._u[j] < 0.5 else -1
        mean = sum(view.values()) / len(view)
        return 1 if mean + self.noise_scale * self._z[j] >= 0 else -1

    def respond_block(self, members, bits, rounds):
        if self._z is None:
            raise RuntimeError("reset() must be called before responding")
        idx = np.asarray(rounds) - 1
        if bits.shape[1] == 0:
            return np.where(self._u[idx] < 0.5, 1, -1).astype(np.int64)
        mean = bits.sum(axis=1) / bits.shape[1]
        return _sign(mean + self.noise_scale * self._z[idx]).astype(np.int64)

    @property
    def spec(self):
        return f"noisy_mean:{self.noise_scale:g}"


def dictator(i_star: int) -> Dictator:
    return Dictator(i_star)


def majority() -> Majority:
    return Majority()


def random_consistent() -> RandomConsistent:
    return RandomConsistent()


def constant(b: int = 1) -> Constant:
    return Constant(b)


def noisy_mean(noise_scale: float) -> NoisyMean:
    return NoisyMean(noise_scale)


BUILTIN = ("dictator", "majority", "random_consistent", "constant", "noisy_mean")


def parse_pirate(spec: str, coalition=None) -> PirateStrategy:
    """Build a strategy from ``"name"`` or ``"name:param"``.

    ``dictator`` without a parameter targets the smallest coalition member.
    """
    name, _, arg = spec.partition(":")
    name = name.strip().replace("-", "_")
    if name == "dictator":
        if arg:
            return Dictator(int(arg))
        if not coalition:
            raise ValueError("dictator needs a target or a nonempty coalition")
        return Dictator(min(coalition))
    if name == "majority":
        return Majority()
    if name == "random_consistent":
        return RandomConsistent()
    if name == "constant":
        return Constant(int(arg) if arg else 1)
    if name == "noisy_mean":
        return NoisyMean(float(arg) if arg else 0.5)
    raise ValueError(f"unknown pirate strategy {spec!r}")
