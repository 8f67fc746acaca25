"""Toy private-key encryption of messages in {-1, 0, +1}.

Contract: ``dec(key, enc(key, m)) == m`` with probability 1.  Messages are
encoded in two bits as ``m + 1`` and masked with a two-bit pad.  A ciphertext
is a pair ``(tag, body)``: ``tag`` is a fresh nonce for the PRF-pad scheme and
the pad index for the one-time pad; ``body`` is the masked code.

Decrypting under the wrong key unmasks a uniformly random code; code 3 is not
produced by any honest encryption and decodes to 0, so wrong-key decryptions
never raise.

Schemes also expose batch operations over a :class:`KeyRing` so an attack can
encrypt a whole table of columns at once.  The batch and scalar paths give the
same ciphertexts for the same generator state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = np.uint64
_MAX64 = np.iinfo(np.uint64).max
_DECODE = np.array([-1, 0, 1, 0], dtype=np.int8)


class DecodeError(ValueError):
    """Structurally malformed ciphertext."""


class PadExhausted(RuntimeError):
    """A one-time-pad key has no unused pads left."""


def _check_messages(m) -> np.ndarray:
    m = np.asarray(m)
    if np.any((m != -1) & (m != 0) & (m != 1)):
        raise ValueError("messages must lie in {-1, 0, +1}")
    return (m + 1).astype(np.uint8)


def _check_ct(ct, tag_limit: int) -> tuple[int, int]:
    try:
        tag, body = ct
        tag, body = int(tag), int(body)
    except (TypeError, ValueError):
        raise DecodeError(f"ciphertext must be a (tag, body) pair, got {ct!r}") from None
    if not 0 <= body <= 3:
        raise DecodeError(f"ciphertext body {body} is not a 2-bit value")
    if not 0 <= tag < tag_limit:
        raise DecodeError(f"ciphertext tag {tag} out of range")
    return tag, body


@dataclass
class CipherTable:
    """Ciphertexts for a block of rounds: ``tag[j, i], body[j, i]``."""

    tag: np.ndarray
    body: np.ndarray

    def entry(self, j: int, i: int) -> tuple[int, int]:
        return int(self.tag[j, i]), int(self.body[j, i])


def _mix(key: np.ndarray, nonce: np.ndarray) -> np.ndarray:
    """Keyed 64-bit mixing (two splitmix-style rounds)."""
    z = key ^ (nonce * _U64(0x9E3779B97F4A7C15))
    for r in range(2):
        z = z + _U64(0xBF58476D1CE4E5B9 + r)
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        z = z ^ (z >> _U64(31))
        z = z ^ ((key << _U64(17)) | (key >> _U64(47)))
    return z


class KeyRing:
    """Keys of a batch of users."""

    def __len__(self):
        raise NotImplementedError

    def take(self, idx) -> "KeyRing":
        raise NotImplementedError


class EncryptionScheme:
    name = "scheme"
    stateful = False

    def gen(self, lam: int, rng: np.random.Generator):
        raise NotImplementedError

    def enc(self, key, m: int, rng: np.random.Generator) -> tuple[int, int]:
        raise NotImplementedError

    def dec(self, key, ct) -> int:
        raise NotImplementedError

    def gen_keys(self, count: int, lam: int, rng: np.random.Generator) -> KeyRing:
        raise NotImplementedError

    def enc_table(self, ring: KeyRing, messages, rng: np.random.Generator) -> CipherTable:
        """Encrypt ``messages[j, i]`` under key ``i`` of ``ring``."""
        raise NotImplementedError

    def dec_many(self, ring: KeyRing, tags, bodies) -> np.ndarray:
        """Decrypt ``tags[..., k], bodies[..., k]`` under key ``k`` of ``ring``."""
        raise NotImplementedError


# --- PRF pad ----------------------------------------------------------------

@dataclass
class PrfRing(KeyRing):
    keys: np.ndarray
    lam: int

    def __len__(self):
        return len(self.keys)

    def __getitem__(self, i) -> int:
        return int(self.keys[i])

    def take(self, idx):
        return PrfRing(self.keys[np.asarray(idx)], self.lam)


class PrfPadScheme(EncryptionScheme):
    """Pad derived from ``(key, nonce)`` by a keyed mixing function."""

    name = "prf"

    @staticmethod
    def _check_lam(lam):
        if not 1 <= lam <= 64:
            raise ValueError("key length must be between 1 and 64 bits")

    def gen_keys(self, count, lam, rng):
        self._check_lam(lam)
        keys = rng.integers(0, _MAX64, size=count, dtype=_U64, endpoint=True)
        if lam < 64:
            keys &= _U64((1 << lam) - 1)
        return PrfRing(keys, lam)

    def gen(self, lam, rng):
        return self.gen_keys(1, lam, rng)[0]

    def _pad(self, keys, nonces):
        return (_mix(np.asarray(keys, dtype=_U64), np.asarray(nonces, dtype=_U64)) & _U64(3)).astype(np.uint8)

    def enc(self, key, m, rng):
        code = _check_messages(m)
        nonce = rng.integers(0, _MAX64, size=1, dtype=_U64, endpoint=True)
        body = code ^ self._pad(np.array([key], dtype=_U64), nonce)[0]
        return int(nonce[0]), int(body)

    def dec(self, key, ct):
        tag, body = _check_ct(ct, 1 << 64)
        pad = self._pad(np.array([key], dtype=_U64), np.array([tag], dtype=_U64))[0]
        return int(_DECODE[body ^ pad])

    def enc_table(self, ring, messages, rng):
        code = _check_messages(messages)
        if code.ndim != 2 or code.shape[1] != len(ring):
            raise ValueError("messages must have one column per key")
        nonce = rng.integers(0, _MAX64, size=code.shape, dtype=_U64, endpoint=True)
        body = code ^ self._pad(ring.keys[None, :], nonce)
        return CipherTable(nonce, body)

    def dec_many(self, ring, tags, bodies):
        bodies = np.asarray(bodies)
        if np.any(bodies > 3):
            raise DecodeError("ciphertext body is not a 2-bit value")
        pad = self._pad(ring.keys, np.asarray(tags, dtype=_U64))
        return _DECODE[(bodies.astype(np.uint8) ^ pad)]


# --- one-time pad -----------------------------------------------------------

class OtpRing(KeyRing):
    """Pre-generated two-bit pads plus a per-key counter of pads used."""

    def __init__(self, pads: np.ndarray, counters: np.ndarray | None = None):
        self.pads = pads
        self.counters = np.zeros(len(pads), dtype=np.int64) if counters is None else counters

    def __len__(self):
        return len(self.pads)

    def __getitem__(self, i) -> "OtpKey":
        return OtpKey(self, int(i))

    def take(self, idx):
        idx = np.asarray(idx)
        return OtpRing(self.pads[idx], self.counters[idx].copy())

    @property
    def capacity(self) -> int:
        return self.pads.shape[1]


@dataclass(frozen=True)
class OtpKey:
    ring: OtpRing
    index: int

    @property
    def pads(self) -> np.ndarray:
        return self.ring.pads[self.index]

    @property
    def used(self) -> int:
        return int(self.ring.counters[self.index])


class OtpScheme(EncryptionScheme):
    """Each encryption consumes the next unused pad of the key."""

    name = "otp"
    stateful = True

    def __init__(self, max_messages: int):
        if max_messages < 1:
            raise ValueError("max_messages must be positive")
        self.max_messages = int(max_messages)

    def gen_keys(self, count, lam, rng):
        pads = rng.integers(0, 4, size=(count, self.max_messages), dtype=np.uint8)
        return OtpRing(pads)

    def gen(self, lam, rng):
        return self.gen_keys(1, lam, rng)[0]

    def enc(self, key: OtpKey, m, rng=None):
        code = _check_messages(m)
        idx = key.used
        if idx >= self.max_messages:
            raise PadExhausted(f"all {self.max_messages} pads of this key are used")
        key.ring.counters[key.index] += 1
        return idx, int(code ^ key.pads[idx])

    def dec(self, key: OtpKey, ct):
        tag, body = _check_ct(ct, self.max_messages)
        return int(_DECODE[body ^ key.pads[tag]])

    def enc_table(self, ring, messages, rng=None):
        code = _check_messages(messages)
        if code.ndim != 2 or code.shape[1] != len(ring):
            raise ValueError("messages must have one column per key")
        rows = code.shape[0]
        idx = ring.counters[None, :] + np.arange(rows)[:, None]
        if idx.size and idx.max() >= self.max_messages:
            raise PadExhausted(f"encrypting {rows} more messages exceeds {self.max_messages} pads")
        ring.counters += rows
        body = code ^ ring.pads[np.arange(len(ring))[None, :], idx]
        return CipherTable(idx.astype(_U64), body)

    def dec_many(self, ring, tags, bodies):
        tags = np.asarray(tags, dtype=np.int64)
        bodies = np.asarray(bodies)
        if np.any(bodies > 3) or np.any((tags < 0) | (tags >= ring.capacity)):
            raise DecodeError("malformed one-time-pad ciphertext")
        return _DECODE[bodies.astype(np.uint8) ^ ring.pads[np.arange(len(ring)), tags]]


def prf_pad_scheme() -> PrfPadScheme:
    return PrfPadScheme()


def otp_scheme(max_messages: int) -> OtpScheme:
    return OtpScheme(max_messages)
