"""Experiment drivers behind the CLI subcommands.

Each runner returns a JSON-ready report dict with the resolved config, the
report rows, a list of named checks and an overall ``passed`` flag.  Reports
never contain wall-clock data so identical configs give identical bytes.
"""

from __future__ import annotations

import logging
import warnings
from pathlib import Path

import numba
import numpy as np
import scipy

from .. import __version__, io
from .. import pde as pdemod
from ..dynamics import (RNG_ALGORITHM, SSEPModel, empirical_pairing, particle_count,
                        simulate_replicas, block_average)
from ..functions import make_profile
from ..geometry import Lattice, MappingParams
from ..master import (MAX_SITES, StateSpaceTooLarge, build_generator, empirical_distribution,
                      evolve, product_distribution, total_variation)
from ..measures import ENTROPY_ZERO_TOL, entropy_bound_check, profile_measure, reference_measure
from .config import ExperimentConfig

SCHEMA_VERSION = "1.0"

log = logging.getLogger(__name__)


def _metadata(config: ExperimentConfig, **extra) -> dict:
    meta = {
        "package": "ssep_hydro",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "rng": RNG_ALGORITHM,
        "seed": config.seed,
        "d1_crosscheck": config.d == 1,
    }
    meta.update(extra)
    return meta


def _check(name: str, passed, **detail) -> dict:
    return {"name": name, "passed": bool(passed), **detail}


def _extremum_check(name: str, rep) -> dict:
    detail = rep.as_dict()
    return _check(name, detail.pop("passed"), **detail)


def _report(command: str, config: ExperimentConfig, rows: list, checks: list, **extra) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config.as_dict(),
        "metadata": _metadata(config, **extra.pop("metadata", {})),
        "rows": rows,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
        **extra,
    }


def _pooled_monotone(errors, ses) -> bool:
    for k in range(len(errors) - 1):
        if errors[k + 1] > errors[k] + np.hypot(ses[k], ses[k + 1]):
            return False
    return True


# --------------------------------------------------------------------------- convergence


def run_convergence(config: ExperimentConfig, out: Path | None = None) -> dict:
    """Monte Carlo estimate of ``E |mean_x G(x/n) eta_t(x) - int G rho(t)|`` for every ``n``."""
    rho0, g, G = (make_profile(p) for p in (config.rho0, config.g, config.G))
    params = MappingParams(config.theta, config.c)
    bc = pdemod.boundary_condition(config.theta, config.c, g)
    times = [float(t) for t in config.snapshot_times]
    grid = pdemod.Grid(config.d, config.grid_m)
    fields = pdemod.solve(rho0, bc, times, grid)
    integrals = [f.integrate(G) for f in fields]
    budgets = [f.quadrature_budget(G) for f in fields]

    rows = []
    per_time: dict[float, list] = {t: [] for t in times}
    for n in sorted(int(n) for n in config.n_list):
        lattice = Lattice(config.d, n)
        model = SSEPModel(lattice, config.theta, config.c, g, eps0=config.eps0)
        initial = profile_measure(rho0, lattice, params)
        occ = simulate_replicas(model, initial, times, config.replicas, config.seed, stream=(n,))
        pairing = empirical_pairing(lattice, occ, G)  # (replicas, snapshots)
        log.info("compare: n=%d done (%d replicas)", n, config.replicas)
        for s, t in enumerate(times):
            err = np.abs(pairing[:, s] - integrals[s])
            se = float(err.std(ddof=1) / np.sqrt(err.size)) if err.size > 1 else 0.0
            lattice_sum = float(empirical_pairing(lattice, reference_measure(fields[s], lattice, params).densities, G))
            row = {
                "theta": config.theta,
                "n": n,
                "t": t,
                "replicas": config.replicas,
                "mean_abs_error": float(err.mean()),
                "std_error": se,
                "mean_pairing": float(pairing[:, s].mean()),
                "pde_integral": integrals[s],
                "quadrature_budget": budgets[s],
                "reference_bias": lattice_sum - integrals[s],
            }
            rows.append(row)
            per_time[t].append(row)

    checks = []
    for t, trows in per_time.items():
        errs = [r["mean_abs_error"] for r in trows]
        ses = [r["std_error"] for r in trows]
        if len(trows) > 1:
            checks.append(_check(f"monotone_decrease[theta={config.theta},t={t}]",
                                 _pooled_monotone(errs, ses), errors=errs, std_errors=ses))
        checks.append(_check(f"final_error[theta={config.theta},t={t}]",
                             errs[-1] < config.error_threshold, error=errs[-1],
                             threshold=config.error_threshold, n=trows[-1]["n"]))
    compat = pdemod.check_compatibility(rho0, bc, config.d)
    return _report("compare", config, rows, checks,
                   metadata={"bc": pdemod.describe_bc(bc),
                             "compatibility": {"residual": compat.residual,
                                               "tolerance": compat.tolerance,
                                               "compatible": compat.compatible}})


def run_sweep(config: ExperimentConfig, out: Path | None = None) -> dict:
    rows, checks, regimes = [], [], {}
    for theta in config.theta_list:
        sub = run_convergence(config.replace(theta=float(theta)))
        rows.extend(sub["rows"])
        checks.extend(sub["checks"])
        regimes[repr(float(theta))] = sub["metadata"]["bc"]
    return _report("sweep", config, rows, checks, metadata={"regimes": regimes})


# --------------------------------------------------------------------------- exact law


def run_master_verify(config: ExperimentConfig, out: Path | None = None) -> dict:
    """Exact ``mu_t`` against the product reference measure on tiny lattices."""
    rho0, g, G = (make_profile(p) for p in (config.rho0, config.g, config.G))
    params = MappingParams(config.theta, config.c)
    bc = pdemod.boundary_condition(config.theta, config.c, g)
    times = sorted({0.0, *(float(t) for t in config.snapshot_times)})
    fields = pdemod.solve(rho0, bc, times, pdemod.Grid(config.d, config.grid_m))

    rows, checks = [], []
    for n in sorted(int(n) for n in config.n_list):
        lattice = Lattice(config.d, n)
        if lattice.size > MAX_SITES:
            raise StateSpaceTooLarge(
                f"master-verify: n={n}, d={config.d} gives {lattice.size} sites (cap {MAX_SITES})")
        model = SSEPModel(lattice, config.theta, config.c, g, eps0=config.eps0)
        Q = build_generator(model)
        nu0 = reference_measure(fields[0], lattice, params)
        mu0 = product_distribution(nu0.densities)
        mc = None
        if config.mc_replicas > 0:
            mc = simulate_replicas(model, nu0, times, config.mc_replicas, config.seed, stream=(n,))
        for s, t in enumerate(times):
            mu_t = evolve(Q, mu0, t)
            nu_t = reference_measure(fields[s], lattice, params)
            bound = entropy_bound_check(mu_t, nu_t, lattice, G)
            row = {
                "n": n,
                "t": t,
                "n_sites": lattice.size,
                "mass": float(mu_t.sum()),
                "entropy": bound.entropy,
                **{f"bound_{k}": v for k, v in bound.as_dict().items() if k != "entropy"},
            }
            if mc is not None:
                row["tv_mc_exact"] = total_variation(empirical_distribution(mc[:, s]), mu_t)
                row["mc_replicas"] = config.mc_replicas
            rows.append(row)
            if out is not None and lattice.size <= 12:
                io.write_distribution_csv(out / f"mu_n{n}_t{t!r}.csv", mu_t)
            if bound.asserted:
                checks.append(_check(f"entropy_bound[n={n},t={t}]", bound.holds,
                                     lhs=bound.lhs, rhs=bound.rhs))
            checks.append(_check(f"finite_n_entropy_bound[n={n},t={t}]",
                                 bound.lhs <= bound.finite_n_rhs,
                                 lhs=bound.lhs, rhs=bound.finite_n_rhs))
            checks.append(_check(f"mass[n={n},t={t}]", abs(row["mass"] - 1) < 1e-10, mass=row["mass"]))
            if t == 0:
                checks.append(_check(f"initial_entropy_zero[n={n}]", bound.entropy <= ENTROPY_ZERO_TOL,
                                     entropy=bound.entropy))
            if mc is not None and t > 0:
                checks.append(_check(f"tv_mc_exact[n={n},t={t}]",
                                     row["tv_mc_exact"] < config.tv_threshold,
                                     tv=row["tv_mc_exact"], threshold=config.tv_threshold))
    return _report("master-verify", config, rows, checks,
                   metadata={"bc": pdemod.describe_bc(bc), "log_base": "e"})


# --------------------------------------------------------------------------- PDE


def neumann_cosine_exact(t, u):
    return 0.5 + 0.25 * np.exp(-np.pi**2 * t) * np.cos(np.pi * u[..., 0])


def dirichlet_sine_exact(t, u):
    d = u.shape[-1]
    return 0.5 + 0.25 * np.exp(-d * np.pi**2 * t) * np.prod(np.sin(np.pi * u), axis=-1)


NEUMANN_COSINE = {"kind": "cosine", "base": 0.5, "amp": 0.25, "axis": 0}
DIRICHLET_SINE = {"kind": "sine_product", "base": 0.5, "amp": 0.25}
HALF = {"kind": "constant", "value": 0.5}


def analytic_errors(d: int, m: int, t: float) -> dict:
    """Sup-norm errors of the two separable test problems at time ``t``."""
    grid = pdemod.Grid(d, m)
    neu = pdemod.solve(NEUMANN_COSINE, pdemod.Neumann(), [t], grid)[0]
    dir_ = pdemod.solve(DIRICHLET_SINE, pdemod.Dirichlet(make_profile(HALF)), [t], grid)[0]
    return {
        "neumann": float(np.max(np.abs(neu.values - neumann_cosine_exact(t, grid.points)))),
        "dirichlet": float(np.max(np.abs(dir_.values - dirichlet_sine_exact(t, grid.points)))),
        "h": grid.h,
    }


def observed_order(coarse: dict, fine: dict, key: str) -> float:
    return float(np.log(coarse[key] / fine[key]) / np.log(coarse["h"] / fine["h"]))


def random_extremum_case(rng: np.random.Generator, eps0: float) -> tuple[dict, dict, object]:
    """Compatible (rho0, g, bc) triple drawn from the catalog, values in (eps0, 1 - eps0)."""
    lo, hi = eps0 + 0.05, 1 - eps0 - 0.05
    half_width = (hi - lo) / 2
    base = float(rng.uniform(lo + 0.5 * half_width, hi - 0.5 * half_width))
    amp = float(rng.uniform(-1, 1) * min(base - lo, hi - base))
    family = int(rng.integers(4))
    freq = float(rng.integers(1, 3))
    if family == 0:
        rho0 = {"kind": "cosine", "base": base, "amp": amp, "axis": int(rng.integers(2)), "freq": freq}
        g = rho0
    elif family == 1:
        rho0 = {"kind": "cosine_product", "base": base, "amp": amp, "freq": freq}
        g = rho0
    elif family == 2:
        rho0 = {"kind": "sine_product", "base": base, "amp": amp}
        g = {"kind": "constant", "value": base}
    else:
        rho0 = {"kind": "constant", "value": base}
        g = rho0
    kind = "dirichlet" if family == 2 else ("dirichlet", "robin", "neumann")[int(rng.integers(3))]
    if kind == "dirichlet":
        bc = pdemod.Dirichlet(make_profile(g))
    elif kind == "robin":
        bc = pdemod.Robin(float(rng.uniform(0.5, 20.0)), make_profile(g))
    else:
        bc = pdemod.Neumann()
    return rho0, g, bc


def run_pde_suite(config: ExperimentConfig, out: Path | None = None) -> dict:
    d, m, T = config.d, config.grid_m, config.T
    checks, rows = [], []

    for alpha in (0.2, 0.5, 0.8):
        for bc in (pdemod.Dirichlet(make_profile({"kind": "constant", "value": alpha})),
                   pdemod.Robin(config.c, make_profile({"kind": "constant", "value": alpha})),
                   pdemod.Neumann()):
            f = pdemod.solve({"kind": "constant", "value": alpha}, bc, [T], pdemod.Grid(d, 16))[0]
            err = float(np.max(np.abs(f.values - alpha)))
            checks.append(_check(f"constant[{bc.kind},alpha={alpha}]", err < 1e-12, error=err))

    coarse = analytic_errors(d, m, T)
    fine = analytic_errors(d, 2 * m, T)
    for key in ("neumann", "dirichlet"):
        order = observed_order(coarse, fine, key)
        rows.append({"case": key, "m": m, "error": coarse[key], "error_2m": fine[key], "order": order})
        checks.append(_check(f"analytic_error[{key}]", coarse[key] < 1e-3, error=coarse[key], m=m, t=T))
        checks.append(_check(f"order[{key}]", 1.8 <= order <= 2.2, order=order))

    rng = np.random.default_rng(config.seed)
    grid = pdemod.Grid(d, min(m, 32))
    for k in range(config.pde_random_cases):
        rho0, g, bc = random_extremum_case(rng, config.eps0)
        fields = pdemod.solve(rho0, bc, np.linspace(0, T, 5), grid)
        rep = pdemod.assert_extremum_principle(fields, rho0, bc, eps0=config.eps0)
        rows.append({"case": f"random_{k}", "bc": bc.kind, "rho0": rho0, **rep.as_dict()})
        checks.append(_extremum_check(f"extremum[random_{k},{bc.kind}]", rep))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g_low = make_profile({"kind": "constant", "value": 0.4})
        robin = pdemod.Robin(1.0, g_low)
        fields = pdemod.solve({"kind": "constant", "value": 0.6}, robin, np.linspace(0, T, 5), grid)
        rep = pdemod.assert_extremum_principle(fields, {"kind": "constant", "value": 0.6}, robin)
        checks.append(_extremum_check("extremum[robin_0.6_to_0.4]", rep))

        rgrid = pdemod.Grid(d, m)
        stiff = pdemod.solve(DIRICHLET_SINE, pdemod.Robin(1e3, make_profile(HALF)), [T], rgrid)[0]
        diff = float(np.max(np.abs(stiff.values - dirichlet_sine_exact(T, rgrid.points))))
        checks.append(_check("robin_large_c_near_dirichlet", diff < 5e-2, difference=diff, c=1e3))

    fields = pdemod.solve(NEUMANN_COSINE, pdemod.Neumann(), np.linspace(0, T, 5), grid)
    masses = [f.integrate() for f in fields]
    drift = float(max(masses) - min(masses))
    checks.append(_check("neumann_conservation", drift < 1e-8, drift=drift))

    long = pdemod.solve(DIRICHLET_SINE, pdemod.Dirichlet(make_profile(HALF)), [1.0], grid)[0]
    gap = float(np.max(np.abs(long.values - 0.5)))
    checks.append(_check("dirichlet_long_time", gap < 1e-3, sup_distance=gap))

    def drho(u):
        return -0.25 * np.pi * np.exp(-np.pi**2 * T) * np.sin(np.pi * u[..., 0])

    res = []
    for mm in (16, 32):
        f = pdemod.solve(NEUMANN_COSINE, pdemod.Neumann(), [T], pdemod.Grid(d, mm))[0]
        res.append(pdemod.logit_gradient_residual(f, 0, drho))
    ratio = res[0] / res[1]
    checks.append(_check("logit_gradient_second_order", 3.0 <= ratio <= 5.0, residuals=res, ratio=ratio))

    for name, desc in (("cosine", NEUMANN_COSINE), ("sine_product", DIRICHLET_SINE),
                       ("affine", {"kind": "affine", "base": 0.3, "slope": [0.2] * d})):
        vals = []
        for mm in (m, 2 * m):
            gr = pdemod.Grid(d, mm)
            vals.append(pdemod.MacroField(gr, 0.0, make_profile(desc)(gr.points)).integrate())
        checks.append(_check(f"quadrature[{name}]", abs(vals[0] - vals[1]) < 1e-4,
                             difference=abs(vals[0] - vals[1])))
    return _report("pde-suite", config, rows, checks)


def run_pde(config: ExperimentConfig, out: Path | None = None) -> dict:
    """Solve the configured PDE, export its snapshots and check the extremum principle."""
    rho0, g = make_profile(config.rho0), make_profile(config.g)
    bc = pdemod.boundary_condition(config.theta, config.c, g)
    grid = pdemod.Grid(config.d, config.grid_m)
    compat = pdemod.check_compatibility(rho0, bc, config.d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fields = pdemod.solve(rho0, bc, config.snapshot_times, grid)
    rep = pdemod.assert_extremum_principle(fields, rho0, bc, eps0=config.eps0)
    rows = []
    for f in fields:
        rows.append({"t": f.t, "min": float(f.values.min()), "max": float(f.values.max()),
                     "mass": f.integrate(), "G_integral": f.integrate(config.G),
                     "quadrature_budget": f.quadrature_budget(config.G)})
        if out is not None:
            io.write_field_csv(out / f"field_t{f.t!r}.csv", f)
            io.write_field_binary(out / f"field_t{f.t!r}.fld", f)
    checks = [
        _extremum_check("extremum_principle", rep),
        _check("compatibility", compat.compatible, residual=compat.residual, tolerance=compat.tolerance),
    ]
    return _report("pde", config, rows, checks, metadata={"bc": pdemod.describe_bc(bc)})


# --------------------------------------------------------------------------- trajectories


def run_simulate(config: ExperimentConfig, out: Path | None = None) -> dict:
    """Seeded replicas for every ``n``: snapshot files plus particle/profile summaries."""
    rho0, g, G = (make_profile(p) for p in (config.rho0, config.g, config.G))
    params = MappingParams(config.theta, config.c)
    times = [float(t) for t in config.snapshot_times]
    rows, checks = [], []
    for n in sorted(int(n) for n in config.n_list):
        lattice = Lattice(config.d, n)
        model = SSEPModel(lattice, config.theta, config.c, g, eps0=config.eps0)
        initial = profile_measure(rho0, lattice, params)
        occ = simulate_replicas(model, initial, times, config.replicas, config.seed, stream=(n,))
        pairing = empirical_pairing(lattice, occ, G)
        counts = particle_count(occ)
        for s, t in enumerate(times):
            rows.append({"n": n, "t": t, "mean_particles": float(counts[:, s].mean()),
                         "mean_density": float(counts[:, s].mean() / lattice.size),
                         "mean_pairing": float(pairing[:, s].mean())})
        header = {"seed": config.seed, "rng": RNG_ALGORITHM, **model.describe()}
        if out is not None:
            path = out / f"trajectory_n{n}.ssep"
            io.write_trajectory(path, header, np.array(times), occ)
            _, t_back, occ_back = io.read_trajectory(path)
            checks.append(_check(f"roundtrip[n={n}]",
                                 np.array_equal(occ_back, occ) and np.array_equal(t_back, times)))
            io.write_trajectory_csv(out / f"trajectory_n{n}.csv", header, np.array(times), occ)
            if config.ell is not None:
                prof = []
                last = occ[:, -1]
                for k, site in enumerate(lattice.sites):
                    blocks = [block_average(lattice, last[r], site, config.ell) for r in range(last.shape[0])]
                    prof.append({"site": k, **{f"x{i}": int(v) for i, v in enumerate(site)},
                                 "mean_occupation": float(last[:, k].mean()),
                                 "mean_block_average": float(np.mean(blocks))})
                io.write_rows_csv(out / f"profile_n{n}_ell{config.ell}.csv", prof)
        checks.append(_check(f"occupations_binary[n={n}]", bool(np.all(occ <= 1))))
    return _report("simulate", config, rows, checks)
