"""Non-interactive variant: the whole codeword matrix is drawn up front and
traced once from a complete answer vector.

Codebooks are generated from the same round tape as the interactive tracer,
so with the same generator ``gen`` reproduces the interactive columns and
``trace`` reproduces the tracer run with deferred accusations.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dist import BiasSample, Kind
from .ifpc import IfpcParams, RoundTape, draw_rounds, score_pass

MAGIC = b"IFPCCODE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQQI")


@dataclass(frozen=True)
class Codebook:
    """``bits[i, j]`` is True when user ``i`` holds +1 in column ``j``."""

    bits: np.ndarray
    p: np.ndarray
    kind: np.ndarray
    params: IfpcParams

    @property
    def N(self) -> int:
        return self.bits.shape[0]

    @property
    def ell(self) -> int:
        return self.bits.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return np.where(self.bits, 1, -1).astype(np.int8)

    @property
    def secret(self) -> list:
        return [BiasSample(float(p), Kind(int(k))) for p, k in zip(self.p, self.kind)]

    def tape(self) -> RoundTape:
        return RoundTape(p=self.p, kind=self.kind, bits=self.bits.T)


def gen(params: IfpcParams, rng: np.random.Generator) -> Codebook:
    tape = draw_rounds(params, rng)
    return Codebook(bits=np.ascontiguousarray(tape.bits.T), p=tape.p, kind=tape.kind, params=params)


def _answers(answers, ell: int) -> np.ndarray:
    a = np.asarray(answers)
    if a.shape != (ell,):
        raise ValueError(f"expected {ell} answers, got shape {a.shape}")
    if np.any((a != 1) & (a != -1)):
        raise ValueError("answers must be +-1")
    return a.astype(np.int8)


def scores(codebook: Codebook, answers) -> np.ndarray:
    """Final score of every user, accumulated round by round."""
    a = _answers(answers, codebook.ell)
    return score_pass(codebook.tape(), a, codebook.params.sigma)[1]


def trace(codebook: Codebook, answers, rule: str = "full") -> frozenset:
    """Users accused from a complete answer vector.

    ``rule="full"`` accuses on the final score; ``rule="partial_max"`` accuses
    when any prefix score exceeds sigma, as the interactive tracer would.
    """
    a = _answers(answers, codebook.ell)
    accused_round, final = score_pass(codebook.tape(), a, codebook.params.sigma)
    if rule == "full":
        hit = final > codebook.params.sigma
    elif rule == "partial_max":
        hit = accused_round > 0
    else:
        raise ValueError(f"unknown tracing rule {rule!r}")
    return frozenset(np.flatnonzero(hit).tolist())


def consistency_violations(C, answers) -> int:
    """Columns in which no user's entry equals the answer."""
    C = C.matrix if isinstance(C, Codebook) else np.asarray(C)
    a = np.asarray(answers)
    if C.ndim != 2 or a.shape != (C.shape[1],):
        raise ValueError(f"shape mismatch: C {C.shape}, answers {a.shape}")
    return int((~(C == a[None, :]).any(axis=0)).sum())


def write_codewords(codebook: Codebook, path) -> None:
    """Public file: header, params JSON, then the row-major bit-packed matrix."""
    meta = json.dumps(codebook.params.to_dict()).encode()
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, codebook.N, codebook.ell, len(meta)))
        fh.write(meta)
        fh.write(np.packbits(codebook.bits, axis=None).tobytes())


def read_codewords(path) -> tuple[np.ndarray, IfpcParams]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("codeword file truncated")
    magic, version, N, ell, meta_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a codeword file")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported codeword file version {version}")
    off = _HEADER.size
    params = IfpcParams.from_dict(json.loads(raw[off:off + meta_len]))
    body = np.frombuffer(raw, dtype=np.uint8, offset=off + meta_len)
    if body.size * 8 < N * ell:
        raise ValueError("codeword file truncated")
    bits = np.unpackbits(body)[:N * ell].astype(bool).reshape(N, ell)
    return bits, params


def write_secret(codebook: Codebook, path) -> None:
    rows = [{"p": float(p), "kind": Kind(int(k)).name} for p, k in zip(codebook.p, codebook.kind)]
    Path(path).write_text(json.dumps(rows))


def read_secret(path) -> tuple[np.ndarray, np.ndarray]:
    rows = json.loads(Path(path).read_text())
    p = np.array([r["p"] for r in rows], dtype=float)
    kind = np.array([Kind[r["kind"]] for r in rows], dtype=np.int8)
    for s in zip(p, kind):
        BiasSample(float(s[0]), Kind(int(s[1])))
    return p, kind


def load_codebook(codeword_path, secret_path) -> Codebook:
    bits, params = read_codewords(codeword_path)
    p, kind = read_secret(secret_path)
    if len(p) != bits.shape[1]:
        raise ValueError("secret length does not match the codeword file")
    return Codebook(bits=bits, p=p, kind=kind, params=params)
