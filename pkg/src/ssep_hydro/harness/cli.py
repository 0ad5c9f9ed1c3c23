"""Command line entry point: ``ssep-hydro <subcommand> [--config FILE] [--<field> VALUE ...]``.

Outputs go to ``$SSEP_OUTPUT_DIR/<subcommand>/`` (default ``./ssep_output``):
``report.json`` (schema-versioned summary), ``rows.csv`` and any per-command
artifacts.  The exit code is 0 exactly when every asserted check passed.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .. import io
from .config import add_override_flags, load_config, output_dir
from .runners import (run_convergence, run_master_verify, run_pde, run_pde_suite, run_simulate,
                      run_sweep)

HELP = {
    "simulate": "run seeded replicas and write trajectory files",
    "pde": "solve the macroscopic equation (--suite: verification suite)",
    "compare": "particle system vs PDE over the configured n_list",
    "master-verify": "exact law on tiny lattices: entropy, bounds, Monte Carlo TV",
    "sweep": "compare for every theta in theta_list",
}

COMMANDS = {
    "simulate": run_simulate,
    "pde": run_pde,
    "compare": run_convergence,
    "master-verify": run_master_verify,
    "sweep": run_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssep-hydro",
        description="Boundary-driven exclusion process: simulation, PDE solver and exact checks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", default=None, help="YAML config file")
        if name == "pde":
            p.add_argument("--suite", action="store_true",
                           help="run the analytic/extremum-principle verification suite")
        add_override_flags(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    skip = {"command", "config", "verbose", "suite"}
    overrides = {k: v for k, v in vars(args).items() if k not in skip}
    config = load_config(args.config, overrides)

    runner = COMMANDS[args.command]
    label = args.command
    if args.command == "pde" and args.suite:
        runner, label = run_pde_suite, "pde-suite"
    out = output_dir() / label
    out.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    report = runner(config, out)
    elapsed = time.perf_counter() - start

    io.write_json(out / "report.json", report)
    io.write_rows_csv(out / "rows.csv", report["rows"])
    io.write_rows_csv(out / "checks.csv", [
        {"name": c["name"], "passed": c["passed"]} for c in report["checks"]])
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    print(f"{label}: {len(report['checks']) - len(failed)}/{len(report['checks'])} checks passed "
          f"-> {out}", file=sys.stderr)
    logging.getLogger(__name__).info("%s finished in %.2f s", label, elapsed)
    return 0 if not failed else 1


if __name__ == "__main__":
    sys.exit(main())
