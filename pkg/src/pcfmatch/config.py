"""Run configuration: TOML/JSON file plus command-line overrides.

Schema (every key optional unless the command needs it)::

    constants = ["e"]              # registered constant ids
    fingerprint_length = 10
    ladder = [10, 30, 100]         # refinement precisions, strictly increasing
    verify_digits = 50
    seed = 0
    threads = 4

    [lhs]
    gamma_degree = 1
    delta_degree = 1
    coef_range = [-6, 6]
    wrappers = ["identity", "reciprocal"]

    [rhs]
    alpha_degree = 1
    beta_degree = 1
    alpha_range = [-6, 6]          # or one [lo, hi] per coefficient
    beta_range = [-6, 6]
    period = 1
    a0_range = [0, 6]              # omit to use a0 = alpha(0)
    depth = 64                     # omit for the per-PCF depth policy

    [optimizer]                    # Descent&Repel overrides
    template = "e_linear"
    rounds = 50

    [output]
    table = "table.bin"
    results = "results.json"
"""
from __future__ import annotations

import hashlib
import json
import os
import pathlib
from dataclasses import dataclass, field

from . import numerics
from .lhs import WRAPPERS, LhsSpace
from .mitm import RhsSpace

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    constants: list[str] = field(default_factory=list)
    fingerprint_length: int = 10
    ladder: list[int] = field(default_factory=lambda: [10, 30, 100])
    verify_digits: int = 50
    seed: int = 0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    lhs: dict = field(default_factory=dict)
    rhs: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    _KEYS = ("constants", "fingerprint_length", "ladder", "verify_digits", "seed", "threads",
             "lhs", "rhs", "optimizer", "output")

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        unknown = sorted(set(data) - set(cls._KEYS))
        if unknown:
            raise ConfigError([f"unknown key {k!r}" for k in unknown])
        cfg = cls(**{k: v for k, v in data.items()})
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = pathlib.Path(path)
        text = path.read_text()
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
        return cls.from_mapping(data)

    def validate(self) -> None:
        """Collect every problem before raising."""
        problems = []
        for c in self.constants:
            try:
                numerics.canonical_name(c)
            except KeyError:
                problems.append(f"constants: unknown constant {c!r}")
        if not 6 <= int(self.fingerprint_length) <= 15:
            problems.append("fingerprint_length: must be between 6 and 15")
        if not self.ladder or any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            problems.append("ladder: must be non-empty and strictly increasing")
        if self.verify_digits < 1:
            problems.append("verify_digits: must be positive")
        if self.threads < 1:
            problems.append("threads: must be at least 1")
        lhs_keys = {"gamma_degree", "delta_degree", "coef_range", "wrappers"}
        for k in sorted(set(self.lhs) - lhs_keys):
            problems.append(f"lhs.{k}: unknown key")
        for w in self.lhs.get("wrappers", []):
            if w not in WRAPPERS:
                problems.append(f"lhs.wrappers: unknown wrapper {w!r}")
        rng = self.lhs.get("coef_range")
        if rng is not None and (len(rng) != 2 or rng[0] > rng[1]):
            problems.append("lhs.coef_range: expected [lo, hi] with lo <= hi")
        rhs_keys = {"alpha_degree", "beta_degree", "alpha_range", "beta_range", "period", "a0_range", "depth"}
        for k in sorted(set(self.rhs) - rhs_keys):
            problems.append(f"rhs.{k}: unknown key")
        if self.rhs:
            try:
                self.rhs_space()
            except (ValueError, TypeError) as exc:
                problems.append(f"rhs: {exc}")
        if problems:
            raise ConfigError(problems)

    def lhs_space(self) -> LhsSpace:
        if not self.constants:
            raise ConfigError(["constants: at least one constant is required for an LHS space"])
        return LhsSpace(
            tuple(self.constants),
            int(self.lhs.get("gamma_degree", 1)),
            int(self.lhs.get("delta_degree", 1)),
            tuple(self.lhs.get("coef_range", (-2, 2))),
            tuple(self.lhs.get("wrappers", WRAPPERS)),
        )

    def rhs_space(self) -> RhsSpace:
        r = self.rhs
        return RhsSpace(
            int(r.get("alpha_degree", 1)),
            int(r.get("beta_degree", 1)),
            _range(r.get("alpha_range", (-5, 5))),
            _range(r.get("beta_range", (-5, 5))),
            int(r.get("period", 1)),
            tuple(r["a0_range"]) if r.get("a0_range") is not None else None,
            r.get("depth"),
        )

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self._KEYS}

    def hash(self) -> str:
        """Stable digest of everything that can change results (threads excluded)."""
        data = self.to_json()
        data.pop("threads")
        data.pop("output")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _range(value):
    if len(value) == 2 and all(isinstance(x, int) for x in value):
        return tuple(value)
    return tuple(tuple(x) for x in value)
