"""Lattice and continuum geometry of the hypercube.

The discrete box ``{1, ..., n-1}^d`` is enumerated in lexicographic
order (last coordinate fastest).  That order is the site index used by every
other module: bit ``k`` of a state integer is the occupation of site ``k``.

Boundary strata follow the lattice convention: a site belongs to face
``(i, '+')`` when ``x_i == 1`` (next to the continuum face ``u_i = 0``) and to
``(i, '-')`` when ``x_i == n - 1`` (next to ``u_i = 1``).  Axes are 0-based.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

TIE_TOL = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryInfo:
    strata: frozenset  # of (axis, '+' | '-')
    corner: bool

    @property
    def on_boundary(self) -> bool:
        return bool(self.strata)


@dataclass(frozen=True)
class Lattice:
    """The box ``{1..n-1}^d`` with reflecting bulk and boundary layer sites."""

    d: int
    n: int

    def __post_init__(self):
        if self.d < 1:
            raise GeometryError(f"dimension must be >= 1, got {self.d}")
        if self.n < 2:
            raise GeometryError(f"scale parameter n must be >= 2, got {self.n}")

    @property
    def size(self) -> int:
        return (self.n - 1) ** self.d

    @cached_property
    def sites(self) -> np.ndarray:
        coords = list(itertools.product(range(1, self.n), repeat=self.d))
        return np.array(coords, dtype=np.int64).reshape(len(coords), self.d)

    @cached_property
    def _lookup(self) -> dict:
        return {tuple(int(v) for v in s): k for k, s in enumerate(self.sites)}

    def index(self, site: Sequence[int]) -> int:
        key = tuple(int(v) for v in site)
        try:
            return self._lookup[key]
        except KeyError:
            raise GeometryError(f"site {key} is outside the box for n={self.n}, d={self.d}") from None

    def contains(self, site: Sequence[int]) -> bool:
        return len(site) == self.d and all(1 <= int(v) <= self.n - 1 for v in site)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        s = self.sites
        return np.any((s == 1) | (s == self.n - 1), axis=1)

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unordered nearest-neighbour pairs ``(a, b)`` with ``a < b``."""
        if self.n == 2:
            return np.zeros((0, 2), dtype=np.int64)
        shape = (self.n - 1,) * self.d
        idx = np.arange(self.size).reshape(shape)
        pairs = []
        for axis in range(self.d):
            lo = np.take(idx, np.arange(0, self.n - 2), axis=axis).ravel()
            hi = np.take(idx, np.arange(1, self.n - 1), axis=axis).ravel()
            pairs.append(np.stack([lo, hi], axis=1))
        e = np.concatenate(pairs, axis=0)
        order = np.lexsort((e[:, 1], e[:, 0]))
        return e[order]

    @cached_property
    def macro_points(self) -> np.ndarray:
        """``x / n`` for every site, shape ``(size, d)``."""
        return self.sites / self.n


def enumerate_sites(lattice: Lattice) -> list[tuple[int, ...]]:
    return [tuple(int(v) for v in s) for s in lattice.sites]


def classify_boundary(lattice: Lattice, site: Sequence[int]) -> BoundaryInfo:
    if not lattice.contains(site):
        raise GeometryError(f"site {tuple(site)} is outside the box")
    strata = set()
    touching = 0
    for axis, v in enumerate(site):
        hit = False
        if v == 1:
            strata.add((axis, "+"))
            hit = True
        if v == lattice.n - 1:
            strata.add((axis, "-"))
            hit = True
        touching += hit
    return BoundaryInfo(frozenset(strata), corner=touching > 1)


def neighbors(lattice: Lattice, site: Sequence[int]) -> list[tuple[int, ...]]:
    out = []
    for axis in range(lattice.d):
        for step in (-1, 1):
            y = list(site)
            y[axis] += step
            if lattice.contains(y):
                out.append(tuple(int(v) for v in y))
    return out


def project_to_boundary(u: Sequence[float]) -> np.ndarray:
    """Nearest point of the cube boundary to ``u``.

    Ties (within ``TIE_TOL``) go to the lowest axis, face 0 before face 1.
    """
    u = np.asarray(u, dtype=float)
    dist = np.concatenate([[u], [1.0 - u]]).T  # (d, 2): distance to face 0 / face 1
    best = dist.min()
    out = u.copy()
    for axis in range(u.size):
        for face in (0, 1):
            if dist[axis, face] <= best + TIE_TOL:
                out[axis] = float(face)
                return out
    raise AssertionError("unreachable")


def project_site(lattice: Lattice, site: Sequence[int]) -> np.ndarray:
    """``[x/n]`` computed in integer arithmetic so ties are exact."""
    n = lattice.n
    dist = [(min(v, n - v)) for v in site]
    best = min(dist)
    out = np.asarray(site, dtype=float) / n
    for axis, v in enumerate(site):
        if v == best:
            out[axis] = 0.0
            return out
        if n - v == best:
            out[axis] = 1.0
            return out
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class MappingParams:
    theta: float
    c: float

    def __post_init__(self):
        if self.theta < 0:
            raise GeometryError(f"theta must be >= 0, got {self.theta}")
        if not self.c > 0:
            raise GeometryError(f"c must be > 0, got {self.c}")


def boundary_gap(n: int, params: MappingParams) -> float:
    return n ** (params.theta - 1.0) / params.c


def coordinate_map(n: int, params: MappingParams) -> np.ndarray:
    """Image of ``j = 0..n`` under the one-dimensional order-preserving map.

    For ``theta >= 1`` this is ``j / n``.  For ``theta < 1`` the first and last
    gaps equal ``n^(theta-1)/c`` and the ``n - 2`` interior gaps share the rest.
    """
    j = np.arange(n + 1, dtype=float)
    if params.theta >= 1:
        return j / n
    gap = boundary_gap(n, params)
    if n < 3 or not gap < 0.5:
        raise GeometryError(
            f"boundary-layer map needs n >= 3 and n^(theta-1)/c < 1/2 "
            f"(n={n}, theta={params.theta}, c={params.c}, gap={gap:.4g})"
        )
    inner = (1.0 - 2.0 * gap) / (n - 2)
    out = gap + (j - 1.0) * inner
    out[0] = 0.0
    out[n] = 1.0
    return out


def macro_position(n: int, params: MappingParams, x) -> np.ndarray:
    """Map closure lattice points (coordinates in ``0..n``) into the unit cube.

    ``x`` may be one point or an array of points with the coordinate axis last.
    """
    x = np.asarray(x)
    if np.any(x < 0) or np.any(x > n):
        raise GeometryError(f"points must have coordinates in [0, {n}]")
    if params.theta >= 1:
        return x / n
    table = coordinate_map(n, params)
    return table[x.astype(np.int64)]
