"""Finite differences for the heat equation on the unit cube.

Three boundary regimes, chosen from the slowness exponent:

* ``theta < 1``  Dirichlet, ``rho = g`` on the boundary;
* ``theta == 1`` Robin, ``d+ rho = c (rho - g)`` on ``u_i = 0`` and
  ``d- rho = c (g - rho)`` on ``u_i = 1`` (relaxation toward ``g``);
* ``theta > 1``  Neumann, zero one-sided normal derivative.

Nodes sit at ``j h`` for ``j = 0..m+1`` along each axis, faces included.  Robin
and Neumann faces are unknowns; their ghost values are eliminated with the
centred second-order boundary difference, axis by axis (so corners apply each
face's condition independently).  Time stepping is explicit Euler.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.interpolate import RegularGridInterpolator

from .functions import Profile, make_profile


class PDEError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    d: int
    m: int

    def __post_init__(self):
        if self.m < 3:
            raise ValueError(f"grid needs at least 3 interior points per axis, got {self.m}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def shape(self) -> tuple:
        return (self.m + 2,) * self.d

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.m + 2) * self.h

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def face_mask(self) -> np.ndarray:
        idx = np.indices(self.shape)
        return np.any((idx == 0) | (idx == self.m + 1), axis=0)


@dataclass(frozen=True)
class Dirichlet:
    g: Profile
    kind = "dirichlet"


@dataclass(frozen=True)
class Robin:
    c: float
    g: Profile
    kind = "robin"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Robin constant must be positive")


@dataclass(frozen=True)
class Neumann:
    kind = "neumann"


def boundary_condition(theta: float, c: float, g) -> Dirichlet | Robin | Neumann:
    g = make_profile(g)
    if theta < 0:
        raise ValueError("theta must be >= 0")
    if theta < 1:
        return Dirichlet(g)
    if theta == 1:
        return Robin(float(c), g)
    return Neumann()


def describe_bc(bc) -> dict:
    out = {"kind": bc.kind}
    if isinstance(bc, Robin):
        out["c"] = bc.c
    if not isinstance(bc, Neumann):
        out["g"] = bc.g.describe()
    return out


@dataclass
class MacroField:
    grid: Grid
    t: float
    values: np.ndarray

    @cached_property
    def _interp(self):
        return RegularGridInterpolator([self.grid.axis] * self.grid.d, self.values, method="linear")

    def __call__(self, u) -> np.ndarray:
        """Multilinear interpolation at points of shape ``(..., d)`` in the closed cube."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return self._interp(u)

    def integrate(self, G=None, rule: str = "trapezoid") -> float:
        f = self.values if G is None else self.values * make_profile(G)(self.grid.points)
        rule_fn = {"trapezoid": trapezoid, "simpson": simpson}[rule]
        for _ in range(self.grid.d):
            f = rule_fn(f, x=self.grid.axis, axis=0)
        return float(f)

    def quadrature_budget(self, G=None) -> float:
        """|trapezoid - Simpson|, a proxy for the trapezoidal error."""
        return abs(self.integrate(G) - self.integrate(G, rule="simpson"))


def stable_dt(grid: Grid, bc) -> float:
    """``h**2 / (4d)``, tightened for Robin so every update stays a convex combination."""
    h, d = grid.h, grid.d
    dt = h * h / (4 * d)
    if isinstance(bc, Robin):
        dt = min(dt, h * h / (2 * d * (1.0 + h * bc.c)))
    return dt


def _face_values(grid: Grid, g: Profile):
    """g on the low and high face of every axis, shaped like the face slices."""
    lo, hi = [], []
    for i in range(grid.d):
        lo.append(np.asarray(g(np.take(grid.points, 0, axis=i)), dtype=float))
        hi.append(np.asarray(g(np.take(grid.points, grid.m + 1, axis=i)), dtype=float))
    return lo, hi


def _along(d, axis, s):
    idx = [slice(None)] * d
    idx[axis] = s
    return tuple(idx)


def _laplacian_ghost(v, grid: Grid, c: float, g_lo, g_hi):
    h = grid.h
    d = grid.d
    lap = -2.0 * d * v
    for i in range(d):
        lap[_along(d, i, slice(0, -1))] += v[_along(d, i, slice(1, None))]
        lap[_along(d, i, slice(1, None))] += v[_along(d, i, slice(0, -1))]
        # ghost neighbours of the two faces
        first = v[_along(d, i, 0)]
        last = v[_along(d, i, -1)]
        ghost_lo = v[_along(d, i, 1)]
        ghost_hi = v[_along(d, i, -2)]
        if c:
            ghost_lo = ghost_lo - 2 * h * c * (first - g_lo[i])
            ghost_hi = ghost_hi + 2 * h * c * (g_hi[i] - last)
        lap[_along(d, i, 0)] += ghost_lo
        lap[_along(d, i, -1)] += ghost_hi
    return lap / (h * h)


def _laplacian_interior(v, grid: Grid):
    h = grid.h
    inner = tuple(slice(1, -1) for _ in range(grid.d))
    lap = -2 * grid.d * v[inner]
    for i in range(grid.d):
        up = list(inner)
        dn = list(inner)
        up[i] = slice(2, None)
        dn[i] = slice(0, -2)
        lap = lap + v[tuple(up)] + v[tuple(dn)]
    return lap / (h * h)


def solve(rho0, bc, snapshot_times, grid: Grid, check: bool = True) -> list[MacroField]:
    """March ``d_t rho = Laplacian rho`` and return the fields at ``snapshot_times``."""
    rho0 = make_profile(rho0)
    times = np.asarray(snapshot_times, dtype=float).ravel()
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("snapshot times must be non-empty, non-negative and sorted")
    if check:
        report = check_compatibility(rho0, bc, grid.d)
        if not report.compatible:
            warnings.warn(f"initial profile violates the {bc.kind} compatibility condition "
                          f"(residual {report.residual:.3g} > {report.tolerance:.3g})")

    v = np.asarray(rho0(grid.points), dtype=float).copy()
    inner = tuple(slice(1, -1) for _ in range(grid.d))
    if isinstance(bc, Dirichlet):
        pinned = np.asarray(bc.g(grid.points), dtype=float)
        v[grid.face_mask] = pinned[grid.face_mask]
    elif isinstance(bc, Robin):
        c = bc.c
        g_lo, g_hi = _face_values(grid, bc.g)
    else:
        c = 0.0
        g_lo = g_hi = None

    dt_max = stable_dt(grid, bc)
    out = []
    t = 0.0
    n_steps = 0
    for target in times:
        span = target - t
        k = int(np.ceil(span / dt_max - 1e-12)) if span > 0 else 0
        dt = span / k if k else 0.0
        for _ in range(k):
            if isinstance(bc, Dirichlet):
                v[inner] += dt * _laplacian_interior(v, grid)
            else:
                v += dt * _laplacian_ghost(v, grid, c, g_lo, g_hi)
            n_steps += 1
            if n_steps % 256 == 0 and not np.all(np.isfinite(v)):
                raise PDEError(f"non-finite values after {n_steps} steps")
        t = float(target)
        if not np.all(np.isfinite(v)):
            raise PDEError(f"non-finite values at t={t}")
        out.append(MacroField(grid, t, v.copy()))
    return out


# --------------------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class CompatibilityReport:
    kind: str
    residual: float
    tolerance: float

    @property
    def compatible(self) -> bool:
        return self.residual <= self.tolerance


def _one_sided(f, pts_face, axis, side, delta):
    def shifted(k):
        p = pts_face.copy()
        p[..., axis] = p[..., axis] + (k * delta if side == 0 else -k * delta)
        return f(p)

    f0, f1, f2 = shifted(0), shifted(1), shifted(2)
    if side == 0:
        return (-3 * f0 + 4 * f1 - f2) / (2 * delta)
    return (3 * f0 - 4 * f1 + f2) / (2 * delta)


def check_compatibility(rho0, bc, d: int, resolution: int = 33, delta: float = 1e-3) -> CompatibilityReport:
    """Largest violation of the boundary condition by ``rho0`` at ``t = 0``.

    One-sided derivatives use second-order differences with step ``delta``;
    the tolerance is ``1e-6`` plus the Richardson estimate of that error.
    """
    rho0 = make_profile(rho0)
    axis = np.linspace(0.0, 1.0, resolution)
    residual = 0.0
    budget = 0.0
    for i in range(d):
        for side in (0, 1):
            grids = [axis] * d
            grids[i] = np.array([float(side)])
            pts = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1)
            val = rho0(pts)
            if isinstance(bc, Dirichlet):
                r = np.abs(val - bc.g(pts))
            else:
                deriv = _one_sided(rho0, pts, i, side, delta)
                fine = _one_sided(rho0, pts, i, side, delta / 2)
                budget = max(budget, float(np.max(np.abs(deriv - fine))) * 4 / 3)
                if isinstance(bc, Robin):
                    gv = bc.g(pts)
                    target = bc.c * (val - gv) if side == 0 else bc.c * (gv - val)
                    r = np.abs(deriv - target)
                else:
                    r = np.abs(deriv)
            residual = max(residual, float(np.max(r)))
    return CompatibilityReport(bc.kind, residual, 1e-6 + budget)


@dataclass(frozen=True)
class ExtremumReport:
    observed_max: float
    observed_min: float
    envelope_max: float
    envelope_min: float
    slack: float
    eps0: float | None

    @property
    def within_envelope(self) -> bool:
        return (self.observed_max <= self.envelope_max + self.slack
                and self.observed_min >= self.envelope_min - self.slack)

    @property
    def within_eps0(self) -> bool | None:
        if self.eps0 is None:
            return None
        return self.eps0 < self.observed_min and self.observed_max < 1 - self.eps0

    @property
    def passed(self) -> bool:
        return self.within_envelope and self.within_eps0 is not False

    def as_dict(self) -> dict:
        return {
            "observed_max": self.observed_max,
            "observed_min": self.observed_min,
            "envelope_max": self.envelope_max,
            "envelope_min": self.envelope_min,
            "slack": self.slack,
            "eps0": self.eps0,
            "within_envelope": self.within_envelope,
            "within_eps0": self.within_eps0,
            "passed": self.passed,
        }


def assert_extremum_principle(fields, rho0, bc, eps0: float | None = None,
                              slack: float = 1e-6) -> ExtremumReport:
    """Compare solution extrema with the maximum/minimum principle envelope.

    Dirichlet and Robin: extrema of ``rho0`` on the closed cube and of ``g`` on
    the boundary.  Neumann: extrema of ``rho0`` only.  Both are taken on the
    solver's nodes, which is what the discrete scheme actually respects.
    """
    grid = fields[0].grid
    r0 = np.asarray(make_profile(rho0)(grid.points))
    hi, lo = float(r0.max()), float(r0.min())
    if not isinstance(bc, Neumann):
        gv = np.asarray(bc.g(grid.points))[grid.face_mask]
        hi, lo = max(hi, float(gv.max())), min(lo, float(gv.min()))
    obs_hi = max(float(f.values.max()) for f in fields)
    obs_lo = min(float(f.values.min()) for f in fields)
    return ExtremumReport(obs_hi, obs_lo, hi, lo, slack, eps0)


def h_transform(field: MacroField) -> MacroField:
    """Pointwise logit ``log(rho / (1 - rho))``."""
    v = field.values
    if np.any(v <= 0) or np.any(v >= 1):
        raise ValueError("logit transform needs values strictly inside (0, 1)")
    return MacroField(field.grid, field.t, np.log(v / (1.0 - v)))


def logit_gradient_residual(field: MacroField, axis: int = 0, drho=None) -> float:
    """max |D_h logit(rho) - d rho / (rho (1 - rho))| over interior nodes.

    ``drho`` is the exact partial derivative (a callable on points); when absent
    the centred difference of ``rho`` is used instead.
    """
    grid = field.grid
    H = h_transform(field).values
    inner = tuple(slice(1, -1) for _ in range(grid.d))
    up = list(inner)
    dn = list(inner)
    up[axis] = slice(2, None)
    dn[axis] = slice(0, -2)
    dH = (H[tuple(up)] - H[tuple(dn)]) / (2 * grid.h)
    rho = field.values[inner]
    if drho is None:
        dr = (field.values[tuple(up)] - field.values[tuple(dn)]) / (2 * grid.h)
    else:
        dr = np.asarray(drho(grid.points[inner]))
    return float(np.max(np.abs(dH - dr / (rho * (1 - rho)))))
