"""
Boundary feedback U(t) = -int_0^l p(l, x) u(x, t) dx, closed-loop runs and
numerical diagnostics of the resulting control signal.
"""
import logging
import math
from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate

from services.boundary_service import CurveKind
from services.kernel_service import KernelKind, KernelParams, forward_transform, kernel_values
from services.solver_service import (
    DecayTrace,
    FieldState,
    SchemeConfig,
    march,
    physical_l2_norm,
)

logger = logging.getLogger(__name__)

PLATEAU_FRACTION = 0.2


class ControlRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    u_value: float
    u_derivative: Optional[float] = None
    l_value: float = 1.0


class RegularitySummary(BaseModel):
    """Discrete L2-in-time norms of U, U' and sqrt(l) U'."""

    u_l2: float
    du_l2: float
    weighted_du_l2: float
    u_partial: list[float]
    du_partial: list[float]
    weighted_partial: list[float]
    plateau: dict[str, float]

    def converged(self, threshold: float = 1e-3) -> bool:
        return all(change <= threshold for change in self.plateau.values())


def feedback(state: FieldState, params: KernelParams) -> float:
    """Control value from the current state, -l int_0^1 p(l, l s) w(s) ds."""
    length = state.length
    s = state.grid
    p = kernel_values(params, np.full_like(s, length), length * s, KernelKind.FORWARD)
    return -length * float(integrate.trapezoid(p * state.values, dx=1.0 / state.n_grid))


def run_closed_loop(
    initial: FieldState,
    cfg: SchemeConfig,
    params: KernelParams,
    sample_times: Optional[Iterable[float]] = None,
    keep_states: bool = False,
) -> tuple[DecayTrace, list[ControlRecord]]:
    """Simulate with the feedback computed at t_n imposed at t_{n+1}.

    Returns:
        The decay trace (control column filled) and the per-step control history.

    Raises:
        ValueError: if lam <= k^2 on a power-law curve.
    """
    curve = initial.curve
    if curve.kind == CurveKind.POWER_LAW:
        k2 = curve.k ** 2
        if params.lam <= k2:
            raise ValueError(f"lambda={params.lam} must exceed k^2={k2}")
        if params.lam <= 25.0 * k2:
            logger.warning("lambda=%g is below 25k^2=%g; regularity estimates do not apply", params.lam, 25.0 * k2)

    history: list[tuple[float, float, float]] = []

    def rule(state: FieldState, t_next: float) -> float:
        value = feedback(state, params)
        entry = (state.t, value, state.length)
        # the t=0 compatibility call and the first step both see t=0
        if history and history[-1][0] == state.t:
            history[-1] = entry
        else:
            history.append(entry)
        return value

    trace = march(initial, cfg, rule, sample_times, keep_states, record_control=True)
    trace.metadata["lambda"] = params.lam

    records: list[ControlRecord] = []
    for index, (t, value, length) in enumerate(history):
        derivative = None
        if index > 0:
            prev_t, prev_value, _ = history[index - 1]
            derivative = (value - prev_value) / (t - prev_t)
        records.append(ControlRecord(t=t, u_value=value, u_derivative=derivative, l_value=length))
    logger.info("closed loop finished: %d control updates, final |U|=%.3e", len(records), abs(records[-1].u_value))
    return trace, records


def target_crosscheck(trace: DecayTrace, params: KernelParams, tolerance: float = 0.05) -> float:
    """Worst ratio ||T u(t)|| / (||T u(0)|| e^(-lam t)) over the kept snapshots.

    The target system decays at least like e^(-lam t); a ratio above
    1 + tolerance is logged as a warning.
    """
    if not trace.states:
        raise ValueError("trace has no kept states; run with keep_states=True")
    first = trace.states[0]
    reference = physical_l2_norm(forward_transform(first, params))
    if reference == 0.0:
        return 0.0
    worst = 0.0
    for snapshot in trace.states:
        transformed = physical_l2_norm(forward_transform(snapshot, params))
        bound = reference * math.exp(-params.lam * (snapshot.t - first.t))
        worst = max(worst, transformed / bound)
    if worst > 1.0 + tolerance:
        logger.warning("target decay violated: worst ratio %.4f > %.4f", worst, 1.0 + tolerance)
    return worst


def _plateau_change(times: np.ndarray, partial: np.ndarray) -> float:
    total = partial[-1]
    if total == 0.0:
        return 0.0
    cutoff = times[0] + (1.0 - PLATEAU_FRACTION) * (times[-1] - times[0])
    earlier = partial[max(int(np.searchsorted(times, cutoff, side="right")) - 1, 0)]
    return float((total - earlier) / total)


def control_regularity_diagnostics(records: list[ControlRecord]) -> RegularitySummary:
    """Trapezoid-in-time norms of U, U' and sqrt(l) U'.

    U' is the difference quotient of consecutive records, centered at the
    interval midpoints; an oscillation between records shows up in full.

    plateau holds, per norm, the relative growth of its squared partial sum
    over the last fifth of the run.
    """
    if len(records) < 3:
        raise ValueError("need at least 3 control records")
    t = np.array([r.t for r in records])
    u = np.array([r.u_value for r in records])
    length = np.array([r.l_value for r in records])
    du = np.diff(u) / np.diff(t)
    mid_t = 0.5 * (t[:-1] + t[1:])
    mid_length = 0.5 * (length[:-1] + length[1:])

    partials = {
        "u": integrate.cumulative_trapezoid(u * u, t, initial=0.0),
        "du": integrate.cumulative_trapezoid(du * du, mid_t, initial=0.0),
        "weighted_du": integrate.cumulative_trapezoid(mid_length * du * du, mid_t, initial=0.0),
    }
    grids = {"u": t, "du": mid_t, "weighted_du": mid_t}
    return RegularitySummary(
        u_l2=math.sqrt(partials["u"][-1]),
        du_l2=math.sqrt(partials["du"][-1]),
        weighted_du_l2=math.sqrt(partials["weighted_du"][-1]),
        u_partial=partials["u"].tolist(),
        du_partial=partials["du"].tolist(),
        weighted_partial=partials["weighted_du"].tolist(),
        plateau={name: _plateau_change(grids[name], values) for name, values in partials.items()},
    )
