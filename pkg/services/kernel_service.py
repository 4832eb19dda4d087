"""
Backstepping kernels p (forward) and q (inverse) as power series, and the
Volterra transformations they define on reference-grid states.

    p(x, y) = (y/2) sum_n  lam^(n+1) ((x^2 - y^2)/4)^n / (n! (n+1)!)
    q(x, y) = (y/2) sum_n (-1)^n lam^(n+1) ((x^2 - y^2)/4)^n / (n! (n+1)!)
"""
import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from exceptions import DomainError, KernelRangeError
from services.solver_service import FieldState

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

RANGE_LIMIT = 700.0
BOUND_GRID = 101


class KernelKind(str, Enum):
    FORWARD = "p"
    INVERSE = "q"


class KernelParams(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(..., gt=0, alias="lambda", description="Target damping rate")
    tol: float = Field(1e-12, gt=0, le=1e-6, description="Relative truncation tolerance")
    max_terms: int = Field(200, ge=20)


class KernelBoundCheck(BaseModel):
    lam: float
    l_value: float
    max_p: float
    max_q: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.max_p <= self.bound and self.max_q <= self.bound


def _check_range(params: KernelParams, x_max: float) -> None:
    scale = math.sqrt(params.lam) * x_max
    if scale > RANGE_LIMIT:
        raise KernelRangeError(scale, RANGE_LIMIT)


def kernel_values(params: KernelParams, x: ArrayLike, y: ArrayLike, kind: KernelKind) -> np.ndarray:
    """Vectorized truncated series on points 0 <= y <= x."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(y < 0) or np.any(y > x):
        raise DomainError("kernel needs 0 <= y <= x")
    if x.size == 0:
        return np.zeros(x.shape)
    _check_range(params, float(np.max(x)))

    sign = 1.0 if kind == KernelKind.FORWARD else -1.0
    ratio = sign * params.lam * (x * x - y * y) / 4.0
    term = np.full(x.shape, params.lam)
    total = term.copy()
    for n in range(params.max_terms - 1):
        term = term * ratio / ((n + 1) * (n + 2))
        if np.all(np.abs(term) <= params.tol * np.abs(total)):
            break
        total += term
    with np.errstate(over="ignore", invalid="ignore"):
        result = 0.5 * y * total
    if not np.all(np.isfinite(result)):
        raise KernelRangeError(math.sqrt(params.lam) * float(np.max(x)), RANGE_LIMIT)
    return result


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def p_kernel(params: KernelParams, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """Forward kernel; p(x, 0) = 0 and p(x, x) = lam x / 2."""
    return _scalar_or_array(kernel_values(params, x, y, KernelKind.FORWARD))


def q_kernel(params: KernelParams, x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """Inverse kernel, the alternating counterpart of p."""
    return _scalar_or_array(kernel_values(params, x, y, KernelKind.INVERSE))


@lru_cache(maxsize=16)
def volterra_matrix(kind: KernelKind, params: KernelParams, length: float, n_grid: int) -> np.ndarray:
    """Trapezoid discretization of f -> int_0^x K(x, s) f(s) ds on x_i = length * i / N.

    Row i holds the weights for the integral over [0, x_i]; row 0 is zero.
    Memoized per (kernel, params, length, N) and returned read-only.
    """
    x = length * np.linspace(0.0, 1.0, n_grid + 1)
    rows, cols = np.tril_indices(n_grid + 1)
    matrix = np.zeros((n_grid + 1, n_grid + 1))
    matrix[rows, cols] = kernel_values(params, x[rows], x[cols], kind)
    matrix *= length / n_grid
    matrix[:, 0] *= 0.5
    matrix[np.diag_indices(n_grid + 1)] *= 0.5
    matrix[0, 0] = 0.0
    matrix.setflags(write=False)
    return matrix


def forward_transform(state: FieldState, params: KernelParams) -> FieldState:
    """w = u + int_0^x p(x, s) u(s) ds in physical coordinates."""
    matrix = volterra_matrix(KernelKind.FORWARD, params, state.length, state.n_grid)
    return FieldState(state.t, state.values + matrix @ state.values, state.curve)


def inverse_transform(state: FieldState, params: KernelParams) -> FieldState:
    """u = w - int_0^x q(x, s) w(s) ds in physical coordinates."""
    matrix = volterra_matrix(KernelKind.INVERSE, params, state.length, state.n_grid)
    return FieldState(state.t, state.values - matrix @ state.values, state.curve)


def kernel_bound(params: KernelParams, l_value: float) -> float:
    """sqrt(lam) exp(sqrt(lam) l)."""
    root = math.sqrt(params.lam)
    _check_range(params, l_value)
    return root * math.exp(root * l_value)


def kernel_bound_check(params: KernelParams, l_value: float) -> KernelBoundCheck:
    """Compare the sampled maxima of |p| and |q| on the triangle with the bound."""
    if l_value <= 0:
        raise ValueError("l_value must be positive")
    xs = np.linspace(0.0, l_value, BOUND_GRID)
    x, y = np.meshgrid(xs, xs, indexing="ij")
    mask = y <= x
    p_max = float(np.max(np.abs(kernel_values(params, x[mask], y[mask], KernelKind.FORWARD))))
    q_max = float(np.max(np.abs(kernel_values(params, x[mask], y[mask], KernelKind.INVERSE))))
    check = KernelBoundCheck(
        lam=params.lam, l_value=l_value, max_p=p_max, max_q=q_max, bound=kernel_bound(params, l_value)
    )
    if not check.holds:
        logger.warning("kernel bound violated: %s", check)
    return check


def kernel_pde_residual(
    params: KernelParams,
    resolution: int,
    kind: KernelKind = KernelKind.FORWARD,
    l_value: float = 1.0,
) -> float:
    """Max centered-difference residual of the kernel equation on the triangle.

    p: -p_xx + p_yy + lam p = 0; q: -q_xx + q_yy - lam q = 0. Only points whose
    five-point stencil stays inside the closed triangle are used.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    h = l_value / resolution
    nodes = np.arange(resolution + 1) * h
    x, y = np.meshgrid(nodes, nodes, indexing="ij")
    mask = y <= x
    grid = np.zeros_like(x)
    grid[mask] = kernel_values(params, x[mask], y[mask], kind)

    i, j = np.meshgrid(np.arange(resolution + 1), np.arange(resolution + 1), indexing="ij")
    inner = (j >= 1) & (j + 1 <= i - 1) & (i + 1 <= resolution)
    ii, jj = i[inner], j[inner]
    center = grid[ii, jj]
    k_xx = (grid[ii + 1, jj] - 2.0 * center + grid[ii - 1, jj]) / (h * h)
    k_yy = (grid[ii, jj + 1] - 2.0 * center + grid[ii, jj - 1]) / (h * h)
    sign = 1.0 if kind == KernelKind.FORWARD else -1.0
    residual = -k_xx + k_yy + sign * params.lam * center
    return float(np.max(np.abs(residual)))
