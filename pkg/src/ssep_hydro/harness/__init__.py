from .config import ExperimentConfig, load_config
from .runners import (run_convergence, run_master_verify, run_pde, run_pde_suite, run_simulate,
                      run_sweep)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "run_convergence",
    "run_master_verify",
    "run_pde",
    "run_pde_suite",
    "run_simulate",
    "run_sweep",
]
