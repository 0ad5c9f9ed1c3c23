"""Experiment configuration: YAML file plus same-name command-line overrides."""

from __future__ import annotations

import argparse
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..functions import make_profile

OUTPUT_DIR_ENV = "SSEP_OUTPUT_DIR"


def _cosine():
    return {"kind": "cosine", "base": 0.5, "amp": 0.25, "axis": 0}


@dataclass
class ExperimentConfig:
    d: int = 2
    theta: float = 1.0
    c: float = 1.0
    T: float = 0.1
    snapshot_times: list = field(default_factory=lambda: [0.1])
    n_list: list = field(default_factory=lambda: [8, 16, 32])
    replicas: int = 100
    seed: int = 0
    grid_m: int = 64
    rho0: dict = field(default_factory=_cosine)
    g: dict = field(default_factory=_cosine)
    G: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    ell: int | None = None
    eps0: float = 0.1
    # master-verify: Monte Carlo replicas compared with the exact law (0 disables)
    mc_replicas: int = 0
    # sweep: slowness exponents visited by ``sweep``
    theta_list: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    # pde suite: randomized extremum-principle cases
    pde_random_cases: int = 20
    error_threshold: float = 0.02
    tv_threshold: float = 0.01

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        times = [float(t) for t in self.snapshot_times]
        if not times or sorted(times) != times or times[0] < 0 or times[-1] > self.T:
            raise ValueError(f"snapshot_times must be sorted within [0, T={self.T}]: {times}")
        if any(int(n) < 2 for n in self.n_list):
            raise ValueError("every n must be >= 2")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if not 0 < self.eps0 < 0.5:
            raise ValueError("eps0 must lie in (0, 1/2)")
        if self.ell is not None and self.ell < 0:
            raise ValueError("ell must be >= 0")
        for name in ("rho0", "g", "G"):
            make_profile(getattr(self, name))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_LIST_ITEM = {"snapshot_times": float, "n_list": int, "theta_list": float}
_DICT_FIELDS = {"rho0", "g", "G"}


def _coerce(name: str, value: Any) -> Any:
    if value is None:
        return None
    if name in _LIST_ITEM:
        if isinstance(value, str):
            value = [v for v in value.replace(" ", "").split(",") if v]
        return [_LIST_ITEM[name](v) for v in value]
    if name in _DICT_FIELDS:
        return json.loads(value) if isinstance(value, str) else dict(value)
    if name == "ell":
        return int(value)
    default = _FIELDS[name].default
    return type(default)(value)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        raw = loaded or {}
        unknown = set(raw) - set(_FIELDS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in raw.items()})


def add_override_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--<field>`` flag per config field, all defaulting to ``None``."""
    for name in _FIELDS:
        hint = "comma-separated list" if name in _LIST_ITEM else (
            "JSON profile descriptor" if name in _DICT_FIELDS else None)
        parser.add_argument(f"--{name}", default=None, help=hint)


def output_dir() -> Path:
    import os

    out = Path(os.environ.get(OUTPUT_DIR_ENV, "ssep_output"))
    out.mkdir(parents=True, exist_ok=True)
    return out
