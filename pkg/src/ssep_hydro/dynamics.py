"""Exact event-driven simulation of the boundary-driven exclusion process.

The simulated generator already carries the diffusive factor ``n**2``, so
simulated time is macroscopic time.  Bulk moves are exchanges across
nearest-neighbour edges at rate ``n**2``; only edges whose endpoints differ
are kept in the rate table since the other exchanges are no-ops.  Boundary
sites flip at rate ``n**2 * c * n**-theta * (g if empty else 1 - g)`` with
``g`` evaluated at the nearest boundary point of ``x/n``.

Event selection is two-level: a uniform draw over the discrepant-edge set
(all share one rate) or a Fenwick-tree search over the boundary flip rates.
Both structures are updated incrementally after each event.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numba import njit

from .functions import Profile, make_profile
from .geometry import Lattice, MappingParams, classify_boundary, project_site

RNG_ALGORITHM = "numpy Philox4x64, one stream per replica from SeedSequence([seed, *stream, replica])"

EXCHANGE = 0
FLIP = 1


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Event:
    kind: str  # "exchange" | "flip"
    sites: tuple  # site indices: (x, y) for exchange, (z,) for flip


@dataclass(frozen=True)
class SSEPModel:
    lattice: Lattice
    theta: float
    c: float
    g: Profile
    eps0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "g", make_profile(self.g))
        MappingParams(self.theta, self.c)  # validates theta, c
        vals = self.boundary_g
        lo = 0.0 if self.eps0 is None else self.eps0
        if vals.size and (vals.min() <= lo or vals.max() >= 1.0 - lo):
            raise ValueError(
                f"boundary profile must take values in ({lo}, {1 - lo}); "
                f"got range [{vals.min():.4g}, {vals.max():.4g}]"
            )

    @property
    def mapping(self) -> MappingParams:
        return MappingParams(self.theta, self.c)

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def speedup(self) -> float:
        return float(self.lattice.n) ** 2

    @property
    def flip_scale(self) -> float:
        """``c * n**-theta``; boundary rates before the ``n**2`` speed-up."""
        return self.c * float(self.lattice.n) ** (-self.theta)

    @cached_property
    def boundary_points(self) -> np.ndarray:
        sites = self.lattice.sites[self.lattice.boundary_indices]
        return np.array([project_site(self.lattice, s) for s in sites]).reshape(-1, self.lattice.d)

    @cached_property
    def boundary_g(self) -> np.ndarray:
        if self.boundary_points.size == 0:
            return np.zeros(0)
        return np.asarray(self.g(self.boundary_points), dtype=float)

    @cached_property
    def boundary_slot(self) -> np.ndarray:
        """Site index -> position in the boundary arrays, or -1 for bulk sites."""
        slot = np.full(self.lattice.size, -1, dtype=np.int64)
        slot[self.lattice.boundary_indices] = np.arange(self.lattice.boundary_indices.size)
        return slot

    @cached_property
    def incidence(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR lists of edge ids touching each site."""
        edges = self.lattice.edges
        n_sites = self.lattice.size
        counts = np.bincount(edges.ravel(), minlength=n_sites)
        ptr = np.zeros(n_sites + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        idx = np.empty(ptr[-1], dtype=np.int64)
        fill = ptr[:-1].copy()
        for e, (a, b) in enumerate(edges):
            idx[fill[a]] = e
            fill[a] += 1
            idx[fill[b]] = e
            fill[b] += 1
        return ptr, idx

    def describe(self) -> dict:
        return {
            "d": self.lattice.d,
            "n": self.lattice.n,
            "theta": self.theta,
            "c": self.c,
            "g": self.g.describe(),
        }


def boundary_flip_rate(model: SSEPModel, z: int | Sequence[int], occ: np.ndarray) -> float:
    """Unscaled flip rate ``c n^-theta [g (1 - eta) + (1 - g) eta]`` at boundary site ``z``."""
    if not np.isscalar(z):
        z = model.lattice.index(z)
    slot = model.boundary_slot[int(z)]
    if slot < 0:
        raise ValueError(f"site {model.lattice.sites[int(z)].tolist()} is not a boundary site")
    gz = model.boundary_g[slot]
    eta = int(occ[int(z)])
    return model.flip_scale * (gz * (1 - eta) + (1.0 - gz) * eta)


def total_rate(model: SSEPModel, occ: np.ndarray) -> float:
    """Total jump rate out of ``occ`` (speed-up included, no-op exchanges excluded)."""
    occ = np.asarray(occ)
    e = model.lattice.edges
    discrepant = int(np.count_nonzero(occ[e[:, 0]] != occ[e[:, 1]])) if e.size else 0
    b = model.lattice.boundary_indices
    eta = occ[b].astype(float)
    flips = model.flip_scale * np.sum(model.boundary_g * (1 - eta) + (1 - model.boundary_g) * eta)
    return model.speedup * (discrepant + flips)


# --------------------------------------------------------------------------- kernel


@njit(cache=True)
def _fenwick_build(rates, tree):
    tree[:] = 0.0
    m = rates.size
    for i in range(m):
        j = i + 1
        while j <= m:
            tree[j] += rates[i]
            j += j & (-j)


@njit(cache=True)
def _fenwick_add(tree, i, delta):
    m = tree.size - 1
    j = i + 1
    while j <= m:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True)
def _fenwick_total(tree):
    m = tree.size - 1
    s = 0.0
    j = m
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit(cache=True)
def _fenwick_find(tree, target):
    m = tree.size - 1
    step = 1
    while step * 2 <= m:
        step *= 2
    pos = 0
    rem = target
    while step > 0:
        nxt = pos + step
        if nxt <= m and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        step //= 2
    if pos >= m:
        pos = m - 1
    return pos


@njit(cache=True)
def _refresh_edges(s, occ, edge_a, edge_b, inc_ptr, inc_idx, disc_list, disc_pos, ndisc):
    for k in range(inc_ptr[s], inc_ptr[s + 1]):
        e = inc_idx[k]
        differ = occ[edge_a[e]] != occ[edge_b[e]]
        p = disc_pos[e]
        if differ and p < 0:
            disc_pos[e] = ndisc
            disc_list[ndisc] = e
            ndisc += 1
        elif (not differ) and p >= 0:
            last = disc_list[ndisc - 1]
            disc_list[p] = last
            disc_pos[last] = p
            disc_pos[e] = -1
            ndisc -= 1
    return ndisc


@njit(cache=True)
def _run(occ, t0, times, max_events, edge_a, edge_b, inc_ptr, inc_idx, slot, bsite,
         g_vals, speedup, flip_scale, rng, snaps, log_kind, log_a, log_b, log_t):
    n_edges = edge_a.size
    n_bnd = bsite.size
    disc_list = np.empty(max(n_edges, 1), dtype=np.int64)
    disc_pos = np.full(max(n_edges, 1), -1, dtype=np.int64)
    ndisc = 0
    for e in range(n_edges):
        if occ[edge_a[e]] != occ[edge_b[e]]:
            disc_pos[e] = ndisc
            disc_list[ndisc] = e
            ndisc += 1
    rates = np.empty(n_bnd)
    for k in range(n_bnd):
        rates[k] = g_vals[k] if occ[bsite[k]] == 0 else 1.0 - g_vals[k]
    tree = np.zeros(n_bnd + 1)
    _fenwick_build(rates, tree)

    n_snap = times.size
    cap = log_kind.size
    t = t0
    nxt = 0
    n_ev = 0
    n_flip = 0
    since_rebuild = 0
    while nxt < n_snap:
        if n_ev >= max_events:
            break
        flip_total = _fenwick_total(tree) if n_bnd > 0 else 0.0
        exch_total = speedup * ndisc
        total = exch_total + speedup * flip_scale * flip_total
        if total <= 0.0:
            while nxt < n_snap:
                snaps[nxt, :] = occ
                nxt += 1
            break
        t_new = t + rng.exponential() / total
        while nxt < n_snap and times[nxt] < t_new:
            snaps[nxt, :] = occ
            nxt += 1
        if nxt >= n_snap:
            t = times[n_snap - 1]
            break
        u = rng.random() * total
        if u < exch_total:
            k = int(u / speedup)
            if k >= ndisc:
                k = ndisc - 1
            e = disc_list[k]
            a = edge_a[e]
            b = edge_b[e]
            occ[a] = 1 - occ[a]
            occ[b] = 1 - occ[b]
            ndisc = _refresh_edges(a, occ, edge_a, edge_b, inc_ptr, inc_idx, disc_list, disc_pos, ndisc)
            ndisc = _refresh_edges(b, occ, edge_a, edge_b, inc_ptr, inc_idx, disc_list, disc_pos, ndisc)
            for s in (a, b):
                q = slot[s]
                if q >= 0:
                    new = g_vals[q] if occ[s] == 0 else 1.0 - g_vals[q]
                    _fenwick_add(tree, q, new - rates[q])
                    rates[q] = new
                    since_rebuild += 1
            kind = 0
        else:
            v = (u - exch_total) / (speedup * flip_scale)
            q = _fenwick_find(tree, v)
            a = bsite[q]
            b = -1
            occ[a] = 1 - occ[a]
            ndisc = _refresh_edges(a, occ, edge_a, edge_b, inc_ptr, inc_idx, disc_list, disc_pos, ndisc)
            new = g_vals[q] if occ[a] == 0 else 1.0 - g_vals[q]
            _fenwick_add(tree, q, new - rates[q])
            rates[q] = new
            since_rebuild += 1
            n_flip += 1
            kind = 1
        if since_rebuild >= 4096:
            _fenwick_build(rates, tree)
            since_rebuild = 0
        if n_ev < cap:
            log_kind[n_ev] = kind
            log_a[n_ev] = a
            log_b[n_ev] = b
            log_t[n_ev] = t_new
        t = t_new
        n_ev += 1
    return t, n_ev, n_flip, nxt


# --------------------------------------------------------------------------- API


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: np.ndarray  # (n_snapshots, n_sites) uint8
    n_events: int
    n_flips: int
    event_log: list = field(default_factory=list)

    @property
    def n_exchanges(self) -> int:
        return self.n_events - self.n_flips


def replica_rng(seed: int, replica: int = 0, stream: tuple = ()) -> np.random.Generator:
    entropy = [int(seed), *(int(k) for k in stream), int(replica)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _kernel_args(model: SSEPModel):
    edges = model.lattice.edges
    ptr, idx = model.incidence
    return (
        np.ascontiguousarray(edges[:, 0]),
        np.ascontiguousarray(edges[:, 1]),
        ptr,
        idx,
        model.boundary_slot,
        np.ascontiguousarray(model.lattice.boundary_indices.astype(np.int64)),
        np.ascontiguousarray(model.boundary_g),
        model.speedup,
        model.flip_scale,
    )


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        raise ValueError("at least one snapshot time is required")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("snapshot times must be non-negative and sorted")
    return times


def simulate(model: SSEPModel, initial, snapshot_times, rng: np.random.Generator,
             log_events: int = 0) -> Trajectory:
    """Run one trajectory from ``initial`` and record it at ``snapshot_times``.

    ``initial`` is a configuration (0/1 array in site order) or an object with
    a ``densities`` attribute, in which case it is sampled from ``rng`` first.
    """
    times = _check_times(snapshot_times)
    if hasattr(initial, "densities"):
        occ = sample_initial(initial, rng)
    else:
        occ = np.array(initial, dtype=np.uint8).copy()
    if occ.shape != (model.lattice.size,):
        raise ValueError(f"configuration has shape {occ.shape}, expected ({model.lattice.size},)")
    if np.any(occ > 1):
        raise ValueError("occupation variables must be 0 or 1")
    snaps = np.zeros((times.size, occ.size), dtype=np.uint8)
    log_kind = np.zeros(log_events, dtype=np.int64)
    log_a = np.zeros(log_events, dtype=np.int64)
    log_b = np.zeros(log_events, dtype=np.int64)
    log_t = np.zeros(log_events)
    _, n_ev, n_flip, _ = _run(occ, 0.0, times, np.iinfo(np.int64).max, *_kernel_args(model), rng,
                              snaps, log_kind, log_a, log_b, log_t)
    log = _decode_log(log_kind, log_a, log_b, log_t, min(n_ev, log_events))
    return Trajectory(times, snaps, int(n_ev), int(n_flip), log)


def _decode_log(kind, a, b, t, count):
    out = []
    for i in range(count):
        if kind[i] == EXCHANGE:
            out.append((float(t[i]), Event("exchange", (int(a[i]), int(b[i])))))
        else:
            out.append((float(t[i]), Event("flip", (int(a[i]),))))
    return out


def step(model: SSEPModel, occ: np.ndarray, rng: np.random.Generator):
    """One jump of the chain: ``(waiting time, event, new configuration)``."""
    occ = np.array(occ, dtype=np.uint8).copy()
    if total_rate(model, occ) <= 0:
        raise SimulationError("total rate is zero: configuration is absorbing")
    log = [np.zeros(1, dtype=np.int64) for _ in range(3)] + [np.zeros(1)]
    snaps = np.zeros((1, occ.size), dtype=np.uint8)
    _run(occ, 0.0, np.array([np.inf]), 1, *_kernel_args(model), rng, snaps, *log)
    (t, event), = _decode_log(*log, 1)
    return t, event, occ


def apply_event(occ: np.ndarray, event: Event) -> np.ndarray:
    out = np.array(occ, dtype=np.uint8).copy()
    if event.kind == "exchange":
        x, y = event.sites
        out[x], out[y] = out[y], out[x]
    elif event.kind == "flip":
        (z,) = event.sites
        out[z] = 1 - out[z]
    else:
        raise ValueError(f"unknown event kind {event.kind!r}")
    return out


def sample_initial(measure, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draws with the per-site densities of ``measure``."""
    p = np.asarray(getattr(measure, "densities", measure), dtype=float)
    return (rng.random(p.size) < p).astype(np.uint8)


def simulate_replicas(model: SSEPModel, initial, snapshot_times, replicas: int, seed: int,
                      stream: tuple = (), first_replica: int = 0) -> np.ndarray:
    """Independent trajectories, replica ``r`` driven by ``replica_rng(seed, r, stream)``.

    Returns occupations of shape ``(replicas, n_snapshots, n_sites)``.  Each
    replica's result depends only on ``(seed, r)``, never on scheduling.
    """
    times = _check_times(snapshot_times)
    out = np.empty((replicas, times.size, model.lattice.size), dtype=np.uint8)
    args = _kernel_args(model)
    empty_i = np.zeros(0, dtype=np.int64)
    empty_f = np.zeros(0)
    fixed = None if hasattr(initial, "densities") else np.asarray(initial, dtype=np.uint8)
    for r in range(replicas):
        rng = replica_rng(seed, first_replica + r, stream)
        occ = sample_initial(initial, rng) if fixed is None else fixed.copy()
        _run(occ, 0.0, times, np.iinfo(np.int64).max, *args, rng, out[r],
             empty_i, empty_i, empty_i, empty_f)
    return out


def particle_count(occ: np.ndarray) -> np.ndarray:
    return np.asarray(occ).sum(axis=-1)


def empirical_pairing(lattice: Lattice, occ: np.ndarray, G) -> np.ndarray | float:
    """``(1/N) sum_x G(x/n) eta(x)`` over the ``N`` sites; ``occ`` may carry leading batch axes."""
    weights = np.asarray(make_profile(G)(lattice.macro_points), dtype=float)
    val = np.asarray(occ, dtype=float) @ weights / lattice.size
    return float(val) if np.ndim(val) == 0 else val


def block(lattice: Lattice, site: Sequence[int], ell: int) -> list[int]:
    """Indices of ``{y in the box : |y - x|_1 <= ell}``."""
    if ell < 0:
        raise ValueError("block radius must be >= 0")
    x = np.asarray(site)
    dist = np.abs(lattice.sites - x).sum(axis=1)
    return np.flatnonzero(dist <= ell).tolist()


def block_average(lattice: Lattice, occ: np.ndarray, site: Sequence[int], ell: int) -> float:
    members = block(lattice, site, ell)
    return float(np.mean(np.asarray(occ)[members]))


def is_boundary(lattice: Lattice, site: Sequence[int]) -> bool:
    return classify_boundary(lattice, site).on_boundary
