"""
Moving boundary l(t) and the change of variables between the physical
interval (0, l(t)) and the reference interval (0, 1).
"""
import logging
from enum import Enum
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from exceptions import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class CurveKind(str, Enum):
    POWER_LAW = "power_law"
    LOG_GROWTH = "log_growth"
    SINUSOIDAL = "sinusoidal"


class BoundaryCurve(BaseModel):
    """Right endpoint of the domain.

    PowerLaw is l(t) = (1+kt)^alpha. LogGrowth is 1 + ln(1+t) and Sinusoidal
    is 1 + sin t; alpha and k are ignored for those two.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: CurveKind = CurveKind.POWER_LAW
    alpha: float = Field(1.0, gt=0, description="Growth exponent (PowerLaw only)")
    k: float = Field(1.0, gt=0, description="Growth rate (PowerLaw only)")

    @property
    def is_monotone(self) -> bool:
        return self.kind != CurveKind.SINUSOIDAL


def _check_time(t: ArrayLike) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"time must be non-negative, got {t}")
    return arr


def _unwrap(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def boundary_value(curve: BoundaryCurve, t: ArrayLike) -> ArrayLike:
    """Return l(t). Accepts scalars or arrays of times."""
    t = _check_time(t)
    if curve.kind == CurveKind.POWER_LAW:
        value = (1.0 + curve.k * t) ** curve.alpha
    elif curve.kind == CurveKind.LOG_GROWTH:
        value = 1.0 + np.log1p(t)
    else:
        value = 1.0 + np.sin(t)
    return _unwrap(np.asarray(value))


def boundary_slope(curve: BoundaryCurve, t: ArrayLike) -> ArrayLike:
    """Return dl/dt."""
    t = _check_time(t)
    if curve.kind == CurveKind.POWER_LAW:
        value = curve.k * curve.alpha * (1.0 + curve.k * t) ** (curve.alpha - 1.0)
    elif curve.kind == CurveKind.LOG_GROWTH:
        value = 1.0 / (1.0 + t)
    else:
        value = np.cos(t)
    return _unwrap(np.asarray(value))


def reference_coefficients(curve: BoundaryCurve, t: float) -> tuple[float, float]:
    """Coefficients of w_t = drift*y*w_y + diffusivity*w_yy at time t.

    drift is l'/l and diffusivity is 1/l^2. For PowerLaw these are
    k*alpha/(1+kt) and (1+kt)^(-2*alpha).

    Raises:
        DomainError: if the domain has collapsed (l(t) <= 0).
    """
    length = boundary_value(curve, t)
    if length <= 0:
        raise DomainError(f"domain length is {length:.3g} at t={t:.6g}")
    if curve.kind == CurveKind.POWER_LAW:
        grown = 1.0 + curve.k * t
        return curve.k * curve.alpha / grown, grown ** (-2.0 * curve.alpha)
    return boundary_slope(curve, t) / length, 1.0 / (length * length)


def to_reference(curve: BoundaryCurve, x: ArrayLike, t: float) -> ArrayLike:
    """Map a physical coordinate in [0, l(t)] to y = x / l(t)."""
    length = boundary_value(curve, t)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > length):
        raise DomainError(f"x outside [0, {length:.6g}] at t={t:.6g}")
    return _unwrap(x / length)


def to_physical(curve: BoundaryCurve, y: ArrayLike, t: float) -> ArrayLike:
    """Map a reference coordinate in [0, 1] to x = l(t) * y."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > 1):
        raise DomainError("y outside [0, 1]")
    return _unwrap(y * boundary_value(curve, t))


def first_collapse(curve: BoundaryCurve, t_final: float) -> float | None:
    """Earliest time in [0, t_final] at which l(t) reaches 0, or None."""
    if curve.kind != CurveKind.SINUSOIDAL:
        return None
    # 1 + sin t first vanishes at 3*pi/2
    collapse = 1.5 * np.pi
    return collapse if t_final >= collapse else None
