"""
Runs a RunConfig end to end: builds the datum, simulates (open or closed
loop), fits the decay and writes the outputs.
"""
import asyncio
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from exceptions import ConfigError, DomainError
from schemas import RunConfig
from services import config_service, report_service
from services.analytic_service import (
    AnalyticSolution,
    closed_loop_envelope,
    evaluate_envelope,
    initial_datum,
    lower_envelope,
    upper_envelope,
)
from services.boundary_service import CurveKind, boundary_value
from services.control_service import (
    ControlRecord,
    control_regularity_diagnostics,
    run_closed_loop,
    target_crosscheck,
)
from services.kernel_service import (
    KernelBoundCheck,
    KernelKind,
    KernelParams,
    forward_transform,
    kernel_bound_check,
    kernel_pde_residual,
)
from services.solver_service import DecayTrace, FieldState, physical_l2_norm, simulate
from services.stability_service import DecayFit, classify, fit_exponential

logger = logging.getLogger(__name__)

FIT_SAMPLES = 200
ENVELOPE_ALLOWANCE = 0.02
RESIDUAL_RESOLUTIONS = (64, 128)


@dataclass
class ScenarioResult:
    config: RunConfig
    summary: dict
    trace: Optional[DecayTrace] = None
    fit: Optional[DecayFit] = None
    records: list[ControlRecord] = field(default_factory=list)
    bound_checks: list[KernelBoundCheck] = field(default_factory=list)
    bound_times: list[float] = field(default_factory=list)


def build_initial_state(config: RunConfig, base_dir: Path = Path(".")) -> FieldState:
    """Grid datum on y_i = i/N at t = 0."""
    n = config.scheme.n_grid
    y = np.linspace(0.0, 1.0, n + 1)
    spec = config.initial
    if spec.kind == "analytic":
        sol = AnalyticSolution(alpha=config.curve.alpha, k=config.curve.k)
        values = np.asarray(initial_datum(sol, y), dtype=float)
    elif spec.kind == "sine":
        values = np.sin(np.pi * y)
    else:
        path = Path(spec.path)
        if not path.is_absolute():
            path = base_dir / path
        try:
            table = pd.read_csv(path, header=None, names=["y", "value"], comment="#")
        except (OSError, pd.errors.ParserError) as exc:
            raise ConfigError(f"cannot read initial datum {path}: {exc}") from exc
        # rough data is projected onto the grid by linear interpolation
        order = np.argsort(table["y"].to_numpy())
        values = np.interp(y, table["y"].to_numpy()[order], table["value"].to_numpy()[order])
    values = spec.amplitude * values
    values[0] = 0.0
    return FieldState(0.0, values, config.curve)


def fit_times(config: RunConfig) -> np.ndarray:
    """Log-spaced times over the fitting window [T/5, T]."""
    t_final = config.scheme.t_final
    return np.geomspace(t_final / 5.0, t_final, FIT_SAMPLES)


def sample_times(config: RunConfig) -> np.ndarray:
    """Uniform output samples plus the log-spaced fitting samples."""
    uniform = np.linspace(0.0, config.scheme.t_final, config.output.n_samples)
    return np.union1d(uniform, fit_times(config))


def fit_trace(trace: DecayTrace, config: RunConfig) -> DecayTrace:
    """The samples of trace that land on the log-spaced fitting times."""
    dt = config.scheme.dt
    steps = set(np.rint(fit_times(config) / dt).astype(int).tolist())
    return DecayTrace(samples=[s for s in trace.samples if int(round(s.t / dt)) in steps])


def _envelope_summary(config: RunConfig, trace: DecayTrace) -> dict:
    curve = config.curve
    if curve.kind != CurveKind.POWER_LAW or config.initial.kind != "analytic":
        return {}
    try:
        lower = lower_envelope(curve.alpha, curve.k)
    except DomainError as exc:
        logger.info("no lower envelope: %s", exc)
        return {"envelope_onset": None}
    times, norms = trace.times(), trace.norms()
    upper = upper_envelope(curve.alpha, curve.k, u0_norm=float(norms[0]))
    late = times >= lower.valid_from
    if not np.any(late):
        return {"envelope_onset": lower.valid_from}
    low = evaluate_envelope(lower, times[late])
    high = evaluate_envelope(upper, times[late])
    inside = (norms[late] >= low * (1 - ENVELOPE_ALLOWANCE)) & (norms[late] <= high * (1 + ENVELOPE_ALLOWANCE))
    return {"envelope_onset": lower.valid_from, "envelope_sandwich": bool(np.all(inside))}


def _closed_loop_envelope_holds(trace: DecayTrace, params: KernelParams) -> bool:
    """Whether every sampled norm sits below the closed-loop decay bound."""
    first = trace.states[0]
    w0_norm = physical_l2_norm(forward_transform(first, params))
    bound = closed_loop_envelope(params, first.curve, w0_norm, trace.times())
    return bool(np.all(trace.norms() <= (1.0 + ENVELOPE_ALLOWANCE) * bound))


def _run_kernel_check(config: RunConfig) -> ScenarioResult:
    params = config.controller.kernel_params()
    times = np.linspace(0.0, config.scheme.t_final, config.output.n_samples)
    checks = [kernel_bound_check(params, boundary_value(config.curve, float(t))) for t in times]
    l_final = checks[-1].l_value
    summary = {"mode": "kernel_check", "lambda": params.lam, "l_final": l_final}
    for kind in KernelKind:
        coarse, fine = (kernel_pde_residual(params, n, kind, l_value=l_final) for n in RESIDUAL_RESOLUTIONS)
        summary[f"residual_{kind.value}"] = fine
        summary[f"residual_order_{kind.value}"] = math.log2(coarse / fine) if fine > 0 else None
    summary["bound_holds"] = all(check.holds for check in checks)
    return ScenarioResult(config=config, summary=summary, bound_checks=checks, bound_times=times.tolist())


def run_config(config: RunConfig, base_dir: Path = Path(".")) -> ScenarioResult:
    """Execute a configuration without writing any files."""
    if config.run.mode == "kernel_check":
        return _run_kernel_check(config)

    initial = build_initial_state(config, base_dir)
    times = sample_times(config)
    curve = config.curve
    summary: dict = {"mode": "simulate", "curve": curve.kind.value, "alpha": curve.alpha, "k": curve.k}
    records: list[ControlRecord] = []

    if config.controller.enabled:
        params = config.controller.kernel_params()
        trace, records = run_closed_loop(initial, config.scheme, params, times, keep_states=True)
        summary["lambda"] = params.lam
    else:
        trace = simulate(initial, config.scheme, sample_times=times)
        summary["lambda"] = None

    fitting = fit_trace(trace, config)
    span = fitting.times()
    fit = classify(fitting, k=curve.k, alpha=curve.alpha, window=(float(span[0]), float(span[-1])))
    exp_rate, _ = fit_exponential(fitting, fit.window)
    summary.update(
        {
            "regime": fit.regime.value,
            "rate": fit.rate,
            "beta": fit.stretch_exponent,
            "r_squared": fit.r_squared,
            "window_start": fit.window[0],
            "window_end": fit.window[1],
            "exp_rate": exp_rate,
            "monotone": curve.is_monotone,
        }
    )
    if config.controller.enabled:
        summary["target_ratio"] = target_crosscheck(trace, params)
        summary["envelope_closed_loop"] = _closed_loop_envelope_holds(trace, params)
        trace.states = None
        regularity = control_regularity_diagnostics(records)
        summary.update(
            {
                "u_l2": regularity.u_l2,
                "du_l2": regularity.du_l2,
                "weighted_du_l2": regularity.weighted_du_l2,
                "regularity_plateau": regularity.converged(),
            }
        )
    else:
        summary.update(_envelope_summary(config, trace))
    logger.info("run finished: regime=%s rate=%.6g r2=%.4f", fit.regime.value, fit.rate, fit.r_squared)
    return ScenarioResult(config=config, summary=summary, trace=trace, fit=fit, records=records)


def write_outputs(result: ScenarioResult, base_dir: Path) -> tuple[Path, Path]:
    output = result.config.output
    trace_path = base_dir / output.trace_path
    summary_path = base_dir / output.summary_path
    if result.trace is not None:
        report_service.write_trace_csv(result.trace, trace_path)
    else:
        report_service.write_bound_table(result.bound_times, result.bound_checks, trace_path)
    report_service.write_summary(result.summary, summary_path)
    return trace_path, summary_path


def run_scenario(path: Union[str, Path]) -> ScenarioResult:
    """Load a config file, run it and write outputs next to the config file."""
    path = Path(path)
    config = config_service.load_config(path)
    result = run_config(config, base_dir=path.parent)
    write_outputs(result, path.parent)
    return result


def run_preset(name: str, out_dir: Union[str, Path]) -> ScenarioResult:
    """Write the preset config into out_dir and run it there."""
    out_dir = Path(out_dir)
    config_path = config_service.save_config(config_service.preset(name), out_dir / f"{name}.ini")
    return run_scenario(config_path)


def _sweep_row(result: ScenarioResult) -> dict:
    summary = result.summary
    return {
        "alpha": result.config.curve.alpha,
        "k": result.config.curve.k,
        "lambda": summary.get("lambda"),
        "regime": summary.get("regime"),
        "rate": summary.get("rate"),
        "beta": summary.get("beta"),
        "r_squared": summary.get("r_squared"),
        "exp_rate": summary.get("exp_rate"),
    }


async def sweep_async(base: RunConfig, grid: dict[str, list[float]], base_dir: Path = Path(".")) -> list[dict]:
    """Run every grid point concurrently; rows come back in grid order."""
    combos = config_service.expand_grid(base, grid)
    limit = asyncio.Semaphore(os.cpu_count() or 1)

    async def run_one(config: RunConfig) -> ScenarioResult:
        async with limit:
            return await asyncio.to_thread(run_config, config, base_dir)

    results = await asyncio.gather(*(run_one(config) for _, config in combos))
    return [_sweep_row(result) for result in results]


def sweep(config_path: Union[str, Path], grid_spec: str, out_path: Optional[Union[str, Path]] = None) -> Path:
    """Run a parameter grid over a base config and write one table row per point."""
    config_path = Path(config_path)
    base = config_service.load_config(config_path)
    grid = config_service.parse_grid(grid_spec)
    rows = asyncio.run(sweep_async(base, grid, config_path.parent))
    if out_path is None:
        out_path = config_path.with_name(f"{config_path.stem}_sweep.csv")
    return report_service.write_sweep_table(rows, out_path)
