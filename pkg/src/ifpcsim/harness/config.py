"""Experiment configuration (versioned JSON)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..ifpc import Mode
from ..pirates import parse_pirate
from ..sq import parse_oracle

SCHEMA_VERSION = 1
KINDS = ("ifpc-game", "nifpc", "attack", "privacy-attack", "real-vs-ideal", "verify-lemmas")
SCHEMES = ("prf", "otp")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    n: int = 8
    N: int | None = None
    beta: float = 0.0
    delta: float | None = None
    mode: str = "scaled"
    sigma: float | None = None
    ell: int | None = None
    pirate: str = "majority"
    oracle: str = "empirical_mean"
    scheme: str = "prf"
    coalition_size: int | None = None
    d: int | None = None
    trials: int = 10
    base_seed: int = 0
    out_dir: str | None = None
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> "ExperimentConfig":
        errors = []
        if self.schema_version != SCHEMA_VERSION:
            errors.append(f"schema_version {self.schema_version} is not {SCHEMA_VERSION}")
        if self.kind not in KINDS:
            errors.append(f"kind must be one of {KINDS}")
        if not isinstance(self.n, int) or self.n < 1:
            errors.append("n must be a positive integer")
        if self.N is not None and (not isinstance(self.N, int) or self.N < max(1, self.n)):
            errors.append("N must be an integer at least n")
        if not 0.0 <= self.beta < 0.5:
            errors.append("beta must lie in [0, 1/2)")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            errors.append("delta must lie in (0, 1]")
        try:
            mode = Mode(self.mode)
        except ValueError:
            errors.append("mode must be 'paper' or 'scaled'")
            mode = None
        if mode is Mode.PAPER and (self.sigma is not None or self.ell is not None):
            errors.append("sigma/ell overrides need mode 'scaled'")
        if self.sigma is not None and not self.sigma > 0:
            errors.append("sigma must be positive")
        if self.ell is not None and (not isinstance(self.ell, int) or self.ell < 1):
            errors.append("ell must be a positive integer")
        if self.scheme not in SCHEMES:
            errors.append(f"scheme must be one of {SCHEMES}")
        if self.coalition_size is not None:
            if not isinstance(self.coalition_size, int) or self.coalition_size < 0:
                errors.append("coalition_size must be a nonnegative integer")
            elif self.N is not None and self.coalition_size > self.N:
                errors.append("coalition_size exceeds N")
        if not isinstance(self.trials, int) or self.trials < 1:
            errors.append("trials must be a positive integer")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            errors.append("base_seed must be a nonnegative integer")
        if self.d is not None and (not isinstance(self.d, int) or self.d < 2):
            errors.append("d must be an integer at least 2")
        if self.kind in ("ifpc-game", "nifpc"):
            try:
                parse_pirate(self.pirate, coalition=range(max(1, self.n)))
            except ValueError as exc:
                errors.append(str(exc))
        if self.kind in ("attack", "privacy-attack", "real-vs-ideal"):
            try:
                parse_oracle(self.oracle)
            except ValueError as exc:
                errors.append(str(exc))
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        return cls(**d).validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)
