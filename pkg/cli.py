#!/usr/bin/env python3
# cli.py - command-line front end for runs, presets, sweeps and kernel checks

import argparse
import logging
import math
import os
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from exceptions import ConfigError, HeatLabError
from services import config_service, report_service, scenario_service
from services.kernel_service import KernelKind, KernelParams, kernel_bound_check, kernel_pde_residual

load_dotenv()

logger = logging.getLogger("heatlab")


def _print_summary(summary: dict) -> None:
    for key, value in summary.items():
        print(f"{key}={report_service.format_value(value)}")


def cmd_run(args: argparse.Namespace) -> None:
    result = scenario_service.run_scenario(args.config)
    _print_summary(result.summary)


def cmd_preset(args: argparse.Namespace) -> None:
    result = scenario_service.run_preset(args.name, args.out)
    _print_summary(result.summary)


def cmd_sweep(args: argparse.Namespace) -> None:
    path = scenario_service.sweep(args.config, args.grid, args.out)
    print(f"table={path}")


def cmd_kernel_check(args: argparse.Namespace) -> None:
    try:
        params = KernelParams(lam=args.lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.l <= 0:
        raise ConfigError("--l must be positive")
    check = kernel_bound_check(params, args.l)
    summary = check.model_dump()
    for kind in KernelKind:
        coarse = kernel_pde_residual(params, 64, kind, l_value=args.l)
        fine = kernel_pde_residual(params, 128, kind, l_value=args.l)
        summary[f"residual_{kind.value}"] = fine
        summary[f"residual_order_{kind.value}"] = math.log2(coarse / fine) if fine > 0 else None
    summary["bound_holds"] = check.holds
    _print_summary(summary)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatlab",
        description="Heat equation on a growing domain: simulation, backstepping control and decay fits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a configuration file")
    run.add_argument("config", help="Path to an INI run configuration")
    run.set_defaults(handler=cmd_run)

    pre = sub.add_parser("preset", help="Write and run a named preset")
    pre.add_argument("name", choices=sorted(config_service.PRESETS))
    pre.add_argument("--out", default=os.getenv("HEATLAB_OUTPUT_DIR", "runs"), help="Output directory")
    pre.set_defaults(handler=cmd_preset)

    sw = sub.add_parser("sweep", help="Run a parameter grid over a base configuration")
    sw.add_argument("config")
    sw.add_argument("--grid", required=True, help="e.g. 'alpha=0.25,0.5,1;k=1'")
    sw.add_argument("--out", default=None, help="Table path (default <config>_sweep.csv)")
    sw.set_defaults(handler=cmd_sweep)

    kc = sub.add_parser("kernel-check", help="Check kernel bound and PDE residuals")
    kc.add_argument("--lambda", dest="lam", type=float, required=True)
    kc.add_argument("--l", type=float, required=True)
    kc.set_defaults(handler=cmd_kernel_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=os.getenv("HEATLAB_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        args.handler(args)
    except HeatLabError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValueError as exc:
        # invariant violations that surface only once the run starts
        logger.error("%s", exc)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
