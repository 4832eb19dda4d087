"""
theta-scheme finite differences for the reference-coordinate problem

    w_t = drift(t) * y * w_y + diffusivity(t) * w_yy,   y in (0, 1)

with w(0, t) = 0 and a prescribed (possibly feedback) value at y = 1.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import integrate, linalg

from exceptions import DivergenceError, DomainError
from services.boundary_service import (
    BoundaryCurve,
    boundary_value,
    first_collapse,
    reference_coefficients,
)

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
COMPATIBILITY_TOL = 1e-10
DEFAULT_SAMPLES = 400

# Called with the latest state and the time at which the returned value is imposed.
BoundaryRule = Callable[["FieldState", float], float]


class Advection(str, Enum):
    CENTERED = "centered"
    UPWIND = "upwind"


class SchemeConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_grid: int = Field(400, ge=8, description="Number of cells N (h = 1/N)")
    dt: float = Field(..., gt=0)
    theta: float = Field(0.5, description="Implicitness, 0.5 = trapezoidal, 1 = backward Euler")
    advection: Advection = Advection.CENTERED
    t_final: float = Field(..., gt=0)
    startup_steps: int = Field(
        2, ge=0, description="Leading steps split into two backward-Euler half steps when theta < 1"
    )

    @field_validator("theta")
    @classmethod
    def theta_in_range(cls, value: float) -> float:
        if not 0.5 <= value <= 1.0:
            raise ValueError("theta outside [0.5,1]")
        return value

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))


@dataclass
class FieldState:
    t: float
    values: np.ndarray
    curve: BoundaryCurve

    @property
    def n_grid(self) -> int:
        return len(self.values) - 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.values))

    @property
    def length(self) -> float:
        return boundary_value(self.curve, self.t)

    def check(self) -> None:
        """Validate the structural invariants before stepping."""
        if self.t < 0:
            raise DomainError(f"negative time {self.t}")
        if self.values.ndim != 1 or len(self.values) < 9:
            raise ValueError("a state needs at least 9 grid values (N >= 8)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("state contains non-finite values")
        if self.values[0] != 0.0:
            raise ValueError("left boundary value must be 0")

    def scaled(self, factor: float) -> "FieldState":
        return FieldState(self.t, factor * self.values, self.curve)


@dataclass(frozen=True)
class TraceSample:
    t: float
    length: float
    norm: float
    energy: float
    control: Optional[float] = None


@dataclass
class DecayTrace:
    samples: list[TraceSample] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    states: Optional[list[FieldState]] = None

    def __post_init__(self):
        times = self.times()
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if np.any(self.norms() < 0):
            raise ValueError("trace norms must be non-negative")

    @classmethod
    def from_arrays(cls, times: Iterable[float], norms: Iterable[float], k: float = 1.0) -> "DecayTrace":
        """Build a trace from bare (t, ||u||) data, e.g. synthetic decay curves."""
        samples = [
            TraceSample(t=float(t), length=float((1.0 + k * t)), norm=float(n), energy=float("nan"))
            for t, n in zip(times, norms)
        ]
        return cls(samples=samples)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=float)

    def norms(self) -> np.ndarray:
        return np.array([s.norm for s in self.samples], dtype=float)

    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.samples], dtype=float)

    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.samples], dtype=float)

    def controls(self) -> np.ndarray:
        return np.array(
            [np.nan if s.control is None else s.control for s in self.samples], dtype=float
        )

    def norm_at(self, t: float) -> float:
        """Norm of the sample closest to t."""
        times = self.times()
        return float(self.samples[int(np.argmin(np.abs(times - t)))].norm)


def energy(state: FieldState) -> float:
    """Reference energy int_0^1 w^2 dy (composite trapezoid)."""
    h = 1.0 / state.n_grid
    return float(integrate.trapezoid(state.values ** 2, dx=h))


def physical_l2_norm(state: FieldState) -> float:
    """||u|| on (0, l(t)); the substitution x = l y gives l * int_0^1 w^2 dy."""
    return math.sqrt(state.length * energy(state))


def assemble_operator(
    curve: BoundaryCurve, t: float, n_grid: int, advection: Advection
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bands (lower, diag, upper) of the spatial operator at interior nodes 1..N-1.

    lower[i-1], diag[i-1] and upper[i-1] multiply w_{i-1}, w_i and w_{i+1}.
    """
    drift, diffusivity = reference_coefficients(curve, t)
    h = 1.0 / n_grid
    y = np.arange(1, n_grid) * h
    velocity = drift * y
    diffusion = diffusivity / (h * h)
    if advection == Advection.CENTERED:
        lower = diffusion - velocity / (2.0 * h)
        upper = diffusion + velocity / (2.0 * h)
        diag = np.full(n_grid - 1, -2.0 * diffusion)
    else:
        forward = np.maximum(velocity, 0.0) / h
        backward = np.minimum(velocity, 0.0) / h
        lower = diffusion - backward
        upper = diffusion + forward
        diag = -2.0 * diffusion - forward + backward
    return lower, diag, upper


def _apply(bands: tuple[np.ndarray, np.ndarray, np.ndarray], w: np.ndarray) -> np.ndarray:
    lower, diag, upper = bands
    return lower * w[:-2] + diag * w[1:-1] + upper * w[2:]


def step(state: FieldState, cfg: SchemeConfig, right_bc: float) -> FieldState:
    """Advance one theta-step with coefficients frozen at t_n and t_{n+1}.

    Args:
        state: current solution, must satisfy its invariants.
        cfg: scheme parameters.
        right_bc: value imposed at y = 1 at the new time level.

    Returns:
        The state at t + dt.

    Raises:
        ValueError: on NaN input or a non-finite boundary value.
    """
    state.check()
    if not math.isfinite(right_bc):
        raise ValueError(f"right boundary value is not finite: {right_bc}")

    n = state.n_grid
    t_new = state.t + cfg.dt
    theta = cfg.theta
    w = state.values

    rhs = np.empty(n + 1)
    rhs[0] = 0.0
    rhs[n] = right_bc
    rhs[1:-1] = w[1:-1]
    if theta < 1.0:
        old = assemble_operator(state.curve, state.t, n, cfg.advection)
        rhs[1:-1] += cfg.dt * (1.0 - theta) * _apply(old, w)

    lower, diag, upper = assemble_operator(state.curve, t_new, n, cfg.advection)
    banded = np.zeros((3, n + 1))
    banded[1, 0] = 1.0
    banded[1, n] = 1.0
    banded[1, 1:-1] = 1.0 - cfg.dt * theta * diag
    # row i: column i+1 sits at banded[0, i+1], column i-1 at banded[2, i-1]
    banded[0, 2:] = -cfg.dt * theta * upper
    banded[2, :-2] = -cfg.dt * theta * lower

    try:
        values = linalg.solve_banded((1, 1), banded, rhs)
    except linalg.LinAlgError as exc:
        raise RuntimeError(f"singular step matrix at t={t_new:.6g}") from exc
    values[0] = 0.0
    return FieldState(t_new, values, state.curve)


def _sample_indices(cfg: SchemeConfig, sample_times: Optional[Iterable[float]]) -> np.ndarray:
    n_steps = cfg.n_steps
    if sample_times is None:
        idx = np.rint(np.linspace(0, n_steps, DEFAULT_SAMPLES + 1))
    else:
        times = np.asarray(list(sample_times), dtype=float)
        if np.any(times < 0) or np.any(times > cfg.t_final * (1.0 + 1e-12)):
            raise ValueError(f"sample times must lie in [0, {cfg.t_final:g}]")
        idx = np.rint(times / cfg.dt)
    return np.unique(np.clip(idx, 0, n_steps).astype(int))


def march(
    initial: FieldState,
    cfg: SchemeConfig,
    boundary: BoundaryRule,
    sample_times: Optional[Iterable[float]] = None,
    keep_states: bool = False,
    record_control: bool = False,
) -> DecayTrace:
    """Time loop shared by open- and closed-loop runs.

    The boundary rule sees the state at t_n and returns the value imposed at
    t_{n+1}; at t = 0 it is also used to make the datum compatible.
    """
    collapse = first_collapse(initial.curve, cfg.t_final)
    if collapse is not None:
        raise DomainError(f"domain collapses at t={collapse:.6g} before t_final={cfg.t_final:g}")
    if not initial.curve.is_monotone:
        logger.warning("boundary curve %s is not monotone; domain shrinks on part of the run", initial.curve.kind.value)

    values = np.array(initial.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("initial datum contains non-finite values")
    if values[0] != 0.0:
        logger.warning("initial datum has w(0)=%.3g, forcing 0", values[0])
        values[0] = 0.0
    state = FieldState(initial.t, values, initial.curve)
    right = boundary(state, state.t)
    override = bool(abs(values[-1] - right) > COMPATIBILITY_TOL)
    if override:
        logger.warning(
            "initial datum incompatible with boundary value (%.3g vs %.3g), overwriting",
            values[-1],
            right,
        )
    values[-1] = right

    wanted = set(_sample_indices(cfg, sample_times).tolist())
    samples: list[TraceSample] = []
    snapshots: list[FieldState] = [] if keep_states else None

    def record(st: FieldState) -> None:
        samples.append(
            TraceSample(
                t=st.t,
                length=st.length,
                norm=physical_l2_norm(st),
                energy=energy(st),
                control=float(st.values[-1]) if record_control else None,
            )
        )
        if keep_states:
            snapshots.append(FieldState(st.t, st.values.copy(), st.curve))

    if 0 in wanted:
        record(state)
    n_steps = cfg.n_steps
    # damps the high-frequency part of an incompatible start under theta < 1
    startup = cfg.model_copy(update={"theta": 1.0, "dt": 0.5 * cfg.dt}) if cfg.theta < 1.0 else None
    for n in range(1, n_steps + 1):
        t_next = initial.t + n * cfg.dt
        if startup is not None and n <= cfg.startup_steps:
            t_half = t_next - 0.5 * cfg.dt
            state = step(state, startup, boundary(state, t_half))
            state.t = t_half
            state = step(state, startup, boundary(state, t_next))
        else:
            state = step(state, cfg, boundary(state, t_next))
        state.t = t_next
        peak = float(np.max(np.abs(state.values)))
        if not math.isfinite(peak) or peak > DIVERGENCE_LIMIT:
            raise DivergenceError(state.t, physical_l2_norm(state) if math.isfinite(peak) else peak)
        if n in wanted:
            record(state)
        if n % 10000 == 0:
            logger.debug("step %d/%d, t=%.4g", n, n_steps, state.t)

    metadata = {
        "curve": initial.curve.kind.value,
        "alpha": initial.curve.alpha,
        "k": initial.curve.k,
        "monotone": initial.curve.is_monotone,
        "n_grid": cfg.n_grid,
        "dt": cfg.dt,
        "theta": cfg.theta,
        "advection": cfg.advection.value,
        "startup_steps": cfg.startup_steps if cfg.theta < 1.0 else 0,
        "boundary_override": override,
    }
    return DecayTrace(samples=samples, metadata=metadata, states=snapshots)


def simulate(
    initial: FieldState,
    cfg: SchemeConfig,
    boundary_source: Optional[Callable[[float], float]] = None,
    sample_times: Optional[Iterable[float]] = None,
    keep_states: bool = False,
) -> DecayTrace:
    """Run the open-loop problem; boundary_source defaults to 0 (uncontrolled)."""
    if boundary_source is None:
        return march(initial, cfg, lambda st, t: 0.0, sample_times, keep_states)
    return march(
        initial,
        cfg,
        lambda st, t: float(boundary_source(t)),
        sample_times,
        keep_states,
        record_control=True,
    )
