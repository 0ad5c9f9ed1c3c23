"""Declarative catalog of smooth profiles on the unit cube.

Profiles are described by small dicts so that configs stay portable, e.g.
``{"kind": "cosine", "base": 0.5, "amp": 0.25, "axis": 0}``.  Every profile
is vectorised: it accepts points of shape ``(..., d)`` and returns ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np


class CatalogError(ValueError):
    pass


def _constant(u, value):
    return np.full(u.shape[:-1], float(value))


def _cosine(u, base, amp, axis=0, freq=1.0):
    return base + amp * np.cos(freq * np.pi * u[..., axis])


def _sine(u, base, amp, axis=0, freq=1.0):
    return base + amp * np.sin(freq * np.pi * u[..., axis])


def _sine_product(u, base, amp, freq=1.0):
    return base + amp * np.prod(np.sin(freq * np.pi * u), axis=-1)


def _cosine_product(u, base, amp, freq=1.0):
    return base + amp * np.prod(np.cos(freq * np.pi * u), axis=-1)


def _affine(u, base, slope):
    slope = np.asarray(slope, dtype=float)
    if slope.size != u.shape[-1]:
        raise CatalogError(f"affine slope has {slope.size} entries for d={u.shape[-1]}")
    return base + u @ slope


_KINDS: dict[str, tuple[Callable, dict]] = {
    "constant": (_constant, {"value": None}),
    "cosine": (_cosine, {"base": None, "amp": None, "axis": 0, "freq": 1.0}),
    "sine": (_sine, {"base": None, "amp": None, "axis": 0, "freq": 1.0}),
    "sine_product": (_sine_product, {"base": None, "amp": None, "freq": 1.0}),
    "cosine_product": (_cosine_product, {"base": None, "amp": None, "freq": 1.0}),
    "affine": (_affine, {"base": None, "slope": None}),
}


@dataclass(frozen=True)
class Profile:
    kind: str
    params: tuple  # sorted (name, value) pairs, hashable

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            u = u.reshape(1)
        fn, _ = _KINDS[self.kind]
        return fn(u, **dict(self.params))

    def describe(self) -> dict[str, Any]:
        out = {"kind": self.kind}
        for k, v in self.params:
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    def sup_norm(self, d: int, resolution: int = 101) -> float:
        """Max of ``|f|`` over a uniform grid on the closed cube."""
        axes = [np.linspace(0.0, 1.0, resolution)] * d
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return float(np.max(np.abs(self(pts))))

    def extrema(self, d: int, resolution: int = 101) -> tuple[float, float]:
        axes = [np.linspace(0.0, 1.0, resolution)] * d
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        v = self(pts)
        return float(v.min()), float(v.max())


def make_profile(desc: dict[str, Any] | Profile) -> Profile:
    if isinstance(desc, Profile):
        return desc
    if not isinstance(desc, dict) or "kind" not in desc:
        raise CatalogError(f"profile descriptor must be a dict with 'kind': {desc!r}")
    kind = desc["kind"]
    if kind not in _KINDS:
        raise CatalogError(f"unknown profile kind {kind!r}; known: {sorted(_KINDS)}")
    _, defaults = _KINDS[kind]
    unknown = set(desc) - set(defaults) - {"kind"}
    if unknown:
        raise CatalogError(f"unknown parameters for {kind!r}: {sorted(unknown)}")
    params = {}
    for name, default in defaults.items():
        if name in desc:
            value = desc[name]
        elif default is None:
            raise CatalogError(f"profile {kind!r} requires parameter {name!r}")
        else:
            value = default
        if isinstance(value, list):
            value = tuple(float(v) for v in value)
        elif name == "axis":
            value = int(value)
        else:
            value = float(value)
        params[name] = value
    return Profile(kind, tuple(sorted(params.items())))


def constant(value: float) -> Profile:
    return make_profile({"kind": "constant", "value": value})
