"""Exact forward evolution of the law of the chain on tiny lattices.

States are integers in ``[0, 2**N)``; bit ``k`` is the occupation of site
``k`` in the lattice enumeration order.  Generators are sparse CSR matrices
``Q`` with ``Q[i, j]`` the jump rate from state ``i`` to ``j`` and diagonal
equal to minus the row sum, acting on row-vector distributions.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import xlogy
from scipy.stats import poisson

from .dynamics import SSEPModel

MAX_SITES = 20


class StateSpaceTooLarge(ValueError):
    pass


class TruncationError(RuntimeError):
    pass


class InfiniteEntropy(ValueError):
    pass


def state_bits(n_sites: int) -> np.ndarray:
    """``(2**n_sites, n_sites)`` occupation table of every state."""
    states = np.arange(2**n_sites, dtype=np.int64)
    return ((states[:, None] >> np.arange(n_sites)) & 1).astype(np.uint8)


def encode(occ: np.ndarray) -> np.ndarray:
    """Configurations (..., N) -> state indices."""
    occ = np.asarray(occ, dtype=np.int64)
    return occ @ (np.int64(1) << np.arange(occ.shape[-1], dtype=np.int64))


def build_generator(model: SSEPModel) -> sp.csr_matrix:
    n_sites = model.lattice.size
    if n_sites > MAX_SITES:
        raise StateSpaceTooLarge(f"{n_sites} sites exceed the exact-evolution cap of {MAX_SITES}")
    n_states = 2**n_sites
    states = np.arange(n_states, dtype=np.int64)
    bits = state_bits(n_sites)
    rows, cols, vals = [], [], []
    for a, b in model.lattice.edges:
        mask = bits[:, a] != bits[:, b]
        src = states[mask]
        rows.append(src)
        cols.append(src ^ ((1 << int(a)) | (1 << int(b))))
        vals.append(np.full(src.size, model.speedup))
    scale = model.speedup * model.flip_scale
    for z, gz in zip(model.lattice.boundary_indices, model.boundary_g):
        empty = bits[:, z] == 0
        rows.append(states)
        cols.append(states ^ (1 << int(z)))
        vals.append(scale * np.where(empty, gz, 1.0 - gz))
    rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    out_rate = np.asarray(off.sum(axis=1)).ravel()
    return (off - sp.diags(out_rate)).tocsr()


def evolve(Q: sp.spmatrix, mu0: np.ndarray, t: float, tol: float = 1e-10,
           max_terms: int = 1_000_000) -> np.ndarray:
    """``mu0 @ expm(t Q)`` by uniformization.

    Time is cut into chunks with ``Lambda * dt <= 200`` and each Poisson series
    is truncated once its tail mass is below ``tol / chunks``, so the l1 error
    (hence every entry's error) is at most ``tol``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    mu = np.asarray(mu0, dtype=float).copy()
    if t == 0:
        return mu
    Q = sp.csr_matrix(Q)
    lam = float(np.max(-Q.diagonal()))
    if lam <= 0:
        return mu
    PT = (sp.identity(Q.shape[0], format="csr") + Q / lam).T.tocsr()
    chunks = max(1, int(np.ceil(lam * t / 200.0)))
    dt = t / chunks
    rate = lam * dt
    tail_tol = tol / chunks
    K = int(poisson.isf(tail_tol, rate)) + 1
    while poisson.sf(K, rate) > tail_tol:
        K += 1
    if K * chunks > max_terms:
        raise TruncationError(f"uniformization needs {K * chunks} terms, budget is {max_terms}")
    weights = poisson.pmf(np.arange(K + 1), rate)
    for _ in range(chunks):
        term = mu
        acc = weights[0] * term
        for k in range(1, K + 1):
            term = PT @ term
            acc += weights[k] * term
        mu = acc
    return mu


def stationary(Q: sp.spmatrix, tol: float = 1e-9) -> np.ndarray:
    """Solve ``pi Q = 0``, ``sum(pi) = 1`` (one balance equation replaced by normalization)."""
    Q = sp.csr_matrix(Q)
    A = Q.T.tolil()
    A[0, :] = np.ones(Q.shape[0])
    rhs = np.zeros(Q.shape[0])
    rhs[0] = 1.0
    pi = spla.spsolve(A.tocsc(), rhs)
    resid = np.max(np.abs(Q.T @ pi)) if pi.size else 0.0
    if not np.all(np.isfinite(pi)) or resid > tol * max(1.0, float(np.max(-Q.diagonal()))):
        raise np.linalg.LinAlgError(f"stationary solve is singular or inaccurate (residual {resid:.3g})")
    return pi


def log_probabilities(nu, n_sites: int) -> np.ndarray:
    """Log-mass of every state under ``nu`` (a product measure or a probability vector)."""
    if hasattr(nu, "densities"):
        from .measures import product_log_likelihood

        return product_log_likelihood(nu, state_bits(n_sites))
    nu = np.asarray(nu, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(nu)


def relative_entropy(mu: np.ndarray, nu) -> float:
    """``sum mu log(mu / nu)`` in nats; raises if ``mu`` charges a ``nu``-null state."""
    mu = np.asarray(mu, dtype=float)
    n_sites = int(round(np.log2(mu.size)))
    log_nu = log_probabilities(nu, n_sites)
    charged = mu > 0
    if np.any(np.isneginf(log_nu[charged])):
        raise InfiniteEntropy("mu is not absolutely continuous with respect to nu")
    return float(np.sum(xlogy(mu[charged], mu[charged]) - mu[charged] * log_nu[charged]))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def empirical_distribution(configs: np.ndarray) -> np.ndarray:
    """State frequencies of a batch of configurations ``(R, N)``."""
    configs = np.asarray(configs)
    counts = np.bincount(encode(configs), minlength=2 ** configs.shape[-1])
    return counts / configs.shape[0]


def marginals(mu: np.ndarray) -> np.ndarray:
    n_sites = int(round(np.log2(mu.size)))
    return np.asarray(mu) @ state_bits(n_sites)


def product_distribution(densities: np.ndarray) -> np.ndarray:
    p = np.asarray(densities, dtype=float)
    bits = state_bits(p.size)
    return np.prod(np.where(bits == 1, p, 1.0 - p), axis=1)
