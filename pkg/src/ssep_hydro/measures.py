"""Bernoulli product measures and the analytic functionals used with them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from .geometry import Lattice, MappingParams, macro_position


@dataclass(frozen=True)
class ProductMeasure:
    """Independent Bernoulli occupations with one density per site."""

    densities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.densities, dtype=float)
        if p.ndim != 1:
            raise ValueError("densities must be one-dimensional (one per site)")
        if np.any(p <= 0) or np.any(p >= 1):
            raise ValueError("product-measure densities must lie strictly inside (0, 1)")
        object.__setattr__(self, "densities", p)

    @property
    def n_sites(self) -> int:
        return self.densities.size

    @classmethod
    def constant(cls, n_sites: int, density: float) -> "ProductMeasure":
        return cls(np.full(n_sites, float(density)))


def reference_measure(field, lattice: Lattice, params: MappingParams) -> ProductMeasure:
    """Product measure with density ``field(macro_position(x))`` at every site ``x``."""
    pts = macro_position(lattice.n, params, lattice.sites)
    return ProductMeasure(np.asarray(field(pts), dtype=float))


def profile_measure(profile, lattice: Lattice, params: MappingParams) -> ProductMeasure:
    """Same placement as :func:`reference_measure` but for a closed-form profile."""
    from .functions import make_profile

    pts = macro_position(lattice.n, params, lattice.sites)
    return ProductMeasure(np.asarray(make_profile(profile)(pts), dtype=float))


def product_log_likelihood(nu: ProductMeasure, occ: np.ndarray) -> np.ndarray | float:
    """``sum_x eta(x) log p_x + (1 - eta(x)) log(1 - p_x)``; ``occ`` may be batched."""
    p = nu.densities
    occ = np.asarray(occ, dtype=float)
    val = occ @ np.log(p) + (1.0 - occ) @ np.log1p(-p)
    return float(val) if np.ndim(val) == 0 else val


# --------------------------------------------------------------------------- large deviations


def psi(x):
    return x * (1.0 - x)


def bregman_psi(x, y):
    """``psi(x) - psi(y) - psi'(y) (x - y)``; equals ``-(x - y)**2``."""
    return psi(x) - psi(y) - (1.0 - 2.0 * y) * (x - y)


def bernoulli_rate(lam, rho):
    """Cramer rate ``lam log(lam/rho) + (1-lam) log((1-lam)/(1-rho))``."""
    lam = np.asarray(lam, dtype=float)
    return xlogy(lam, lam / rho) + xlogy(1.0 - lam, (1.0 - lam) / (1.0 - rho))


def ld_sup_check(rho: float, C: float, grid_points: int = 10_001) -> tuple[float, float]:
    """``sup_{lam in [0,1]} C * M(lam, rho) - bernoulli_rate(lam, rho)`` and its maximiser.

    Uniform grid search, then a bounded golden-section-type refinement around
    the best grid point.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if C < 0:
        raise ValueError("C must be non-negative")

    def objective(lam):
        return C * bregman_psi(lam, rho) - bernoulli_rate(lam, rho)

    lam = np.linspace(0.0, 1.0, grid_points)
    vals = objective(lam)
    k = int(np.argmax(vals))
    lo, hi = lam[max(k - 1, 0)], lam[min(k + 1, grid_points - 1)]
    res = minimize_scalar(lambda x: -float(objective(x)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    best_lam, best_val = float(lam[k]), float(vals[k])
    if -res.fun >= best_val:
        best_lam, best_val = float(res.x), float(-res.fun)
    return best_val, best_lam


def subgaussian_gap(p: float, thetas: np.ndarray) -> np.ndarray:
    """``log E exp(theta (X - p)) - theta**2 / 8`` for ``X ~ Bernoulli(p)``."""
    thetas = np.asarray(thetas, dtype=float)
    log_mgf = np.logaddexp(np.log(p) + thetas * (1 - p), np.log1p(-p) - thetas * p)
    return log_mgf - thetas**2 / 8.0


def subgaussian_check(p: float, theta_max: float = 50.0, points: int = 200_001) -> float:
    """Max over a symmetric grid of the Hoeffding-lemma gap; should be ``<= 0``."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    return float(np.max(subgaussian_gap(p, np.linspace(-theta_max, theta_max, points))))


# --------------------------------------------------------------------------- entropy inequality


# entropies below this are round-off of an exact zero (mu == nu)
ENTROPY_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class EntropyBound:
    lhs: float
    rhs: float
    entropy: float
    n_sites: int
    g_sup: float
    g_sq_sum: float

    @property
    def asserted(self) -> bool:
        return self.entropy > ENTROPY_ZERO_TOL

    @property
    def holds(self) -> bool | None:
        """``lhs <= rhs``; ``None`` when the entropy vanishes (bound not asserted)."""
        if not self.asserted:
            return None
        return self.lhs <= self.rhs

    @property
    def finite_n_rhs(self) -> float:
        """Entropy-inequality bound keeping the ``log 2`` from ``e^|x| <= e^x + e^-x``,
        optimised over ``gamma``: ``sqrt((H + log 2) * sum_x G(x/n)^2 / 2) / N`` for ``N`` sites."""
        return float(np.sqrt((self.entropy + np.log(2.0)) * self.g_sq_sum / 2.0) / self.n_sites)

    def as_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "entropy": self.entropy,
            "entropy_per_site": self.entropy / self.n_sites,
            "asserted": self.asserted,
            "holds": self.holds,
            "finite_n_rhs": self.finite_n_rhs,
            "finite_n_holds": self.lhs <= self.finite_n_rhs,
        }


def entropy_bound_check(mu: np.ndarray, nu: ProductMeasure, lattice: Lattice, G) -> EntropyBound:
    """Both sides of ``E_mu |<G, eta - rho>| <= (|G|_inf + 1) sqrt(H(mu|nu) / N)`` on ``N`` sites.

    The left side is computed by full enumeration of the state space.
    """
    from .functions import make_profile
    from .master import relative_entropy, state_bits

    G = make_profile(G)
    weights = np.asarray(G(lattice.macro_points), dtype=float)
    bits = state_bits(lattice.size).astype(float)
    centred = (bits - nu.densities) @ weights / lattice.size
    lhs = float(np.dot(mu, np.abs(centred)))
    H = max(relative_entropy(mu, nu), 0.0)
    g_sup = G.sup_norm(lattice.d)
    rhs = (g_sup + 1.0) * np.sqrt(H / lattice.size)
    return EntropyBound(lhs, float(rhs), H, lattice.size, g_sup, float(np.sum(weights**2)))
