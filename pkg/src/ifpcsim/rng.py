"""Seed handling.

Every game is driven by one integer seed.  Independent roles inside a game
(tracer, pirate, sampling, keys, encryption, oracle) get their own Philox
stream, derived as ``SeedSequence(seed, spawn_key=(role,))``.  Because the
role index is fixed, adding or skipping a role never perturbs the others, and
trial ``k`` of an experiment simply uses ``base_seed + k``.
"""
from __future__ import annotations

import numpy as np

ROLES = {
    "tracer": 0,
    "pirate": 1,
    "coalition": 2,
    "sample": 3,
    "keys": 4,
    "enc": 5,
    "oracle": 6,
    "analysis": 7,
}


def stream(seed, role: str) -> np.random.Generator:
    """Philox generator for ``role`` under ``seed``.

    ``seed`` may be an int or an existing ``Generator``; in the latter case a
    child generator is spawned from it (results then depend on call order).
    """
    if isinstance(seed, np.random.Generator):
        return seed.spawn(1)[0]
    if role not in ROLES:
        raise KeyError(f"unknown stream role {role!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(ROLES[role],))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))


def trial_seed(base_seed: int, index: int) -> int:
    return int(base_seed) + int(index)
