"""
Closed-form solutions of the uncontrolled problem on (0, (1+kt)^alpha) and
the decay envelopes a numerical trace must sit between.
"""
import logging
import math
from enum import Enum
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, special

from exceptions import DomainError
from services.boundary_service import BoundaryCurve, CurveKind, boundary_value
from services.kernel_service import KernelParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

PI2 = math.pi ** 2
ONSET_SEARCH_T_MAX = 50.0
ONSET_SEARCH_STEP = 0.1


class AnalyticSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=0)
    k: float = Field(..., gt=0)

    @property
    def curve(self) -> BoundaryCurve:
        return BoundaryCurve(kind=CurveKind.POWER_LAW, alpha=self.alpha, k=self.k)


class EnvelopeKind(str, Enum):
    POLY_UPPER = "poly_upper"
    POLY_LOWER = "poly_lower"
    STRETCHED_UPPER = "stretched_upper"
    STRETCHED_LOWER = "stretched_lower"


class DecayEnvelope(BaseModel):
    """C * (1+kt)^(-poly_exponent) * exp(-stretch_rate * t^stretch_exponent)."""

    model_config = ConfigDict(frozen=True)

    kind: EnvelopeKind
    coefficient: float = Field(..., gt=0)
    poly_exponent: float = Field(0.0, ge=0)
    stretch_rate: float = Field(0.0, ge=0)
    stretch_exponent: float = Field(0.0, ge=0)
    valid_from: float = Field(0.0, ge=0)
    k: float = Field(1.0, gt=0)


def _check_params(alpha: float, k: float) -> None:
    if alpha <= 0 or k <= 0:
        raise ValueError(f"alpha and k must be positive, got alpha={alpha}, k={k}")


def _log_amplitude(sol: AnalyticSolution, t: float) -> float:
    """log G(t), the x-independent factor of the closed form."""
    grown = 1.0 + sol.k * t
    if sol.alpha == 0.5:
        return (-sol.alpha / 2.0 - PI2 / sol.k) * math.log(grown)
    beta = 1.0 - 2.0 * sol.alpha
    return -sol.alpha / 2.0 * math.log(grown) - PI2 * (grown ** beta - 1.0) / (sol.k * beta)


def exact_solution(sol: AnalyticSolution, x: ArrayLike, t: float) -> ArrayLike:
    """Evaluate u(x, t) = sin(pi x / l) G(t) exp(k^2 a^2 x^2 t / (4(1+kt))) exp(-k a x^2 / 4).

    The two Gaussian factors and G are combined in a single exponential so
    that large-time evaluations do not underflow before the product does.

    Raises:
        DomainError: if t < 0 or x lies outside [0, l(t)].
    """
    length = boundary_value(sol.curve, t)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > length):
        raise DomainError(f"x outside [0, {length:.6g}] at t={t:.6g}")
    a, k = sol.alpha, sol.k
    quadratic = k * k * a * a * t / (4.0 * (1.0 + k * t)) - k * a / 4.0
    value = np.sin(np.pi * x / length) * np.exp(_log_amplitude(sol, t) + quadratic * x * x)
    return float(value) if value.ndim == 0 else value


def initial_datum(sol: AnalyticSolution, y: ArrayLike) -> ArrayLike:
    """Trace of the closed form at t = 0, sin(pi y) exp(-k alpha y^2 / 4)."""
    return exact_solution(sol, y, 0.0)


def analytic_l2_norm(sol: AnalyticSolution, t: float) -> float:
    """Physical L2 norm of the closed form on (0, l(t)) by adaptive quadrature."""
    length = boundary_value(sol.curve, t)
    value, _ = integrate.quad(
        lambda x: exact_solution(sol, x, t) ** 2, 0.0, length, epsabs=0.0, epsrel=1e-10, limit=200
    )
    return math.sqrt(value)


def heat_residual(sol: AnalyticSolution, x: np.ndarray, t: float, h: float) -> np.ndarray:
    """Second-order centered residual u_t - u_xx at interior points x.

    The closed form solves the heat equation exactly only for alpha = 1;
    for other exponents this reports how far the formula is from a solution.
    """
    x = np.asarray(x, dtype=float)
    u_t = (exact_solution(sol, x, t + h) - exact_solution(sol, x, t - h)) / (2.0 * h)
    u_xx = (
        exact_solution(sol, x + h, t) - 2.0 * exact_solution(sol, x, t) + exact_solution(sol, x - h, t)
    ) / (h * h)
    return u_t - u_xx


def lower_constant(alpha: float, k: float) -> float:
    """C1 = (2/(k alpha))^(3/2) (sqrt(pi) - 1) / 8."""
    return (2.0 / (k * alpha)) ** 1.5 * (math.sqrt(math.pi) - 1.0) / 8.0


def onset_time(
    alpha: float,
    k: float,
    t_max: float = ONSET_SEARCH_T_MAX,
    step: float = ONSET_SEARCH_STEP,
) -> float:
    """Smallest grid time from which the Gaussian-integral estimates hold.

    With Y = sqrt(k alpha / 2) l(t) / 2 both Y exp(-Y^2) / 2 <= 1/8 and
    erf(Y) >= 1/2 must hold; Y grows with t so the first grid time suffices.

    Raises:
        DomainError: if no grid time up to t_max qualifies.
    """
    _check_params(alpha, k)
    times = np.round(np.arange(0.0, t_max + step / 2.0, step), 10)
    y = math.sqrt(k * alpha / 2.0) * (1.0 + k * times) ** alpha / 2.0
    ok = (y * np.exp(-y * y) / 2.0 <= 0.125) & (special.erf(y) >= 0.5)
    hits = np.nonzero(ok)[0]
    if hits.size == 0:
        raise DomainError(
            f"lower-envelope onset not reached by t={t_max:g} (alpha={alpha}, k={k})"
        )
    return float(times[hits[0]])


def lower_envelope(alpha: float, k: float, t0: Optional[float] = None) -> DecayEnvelope:
    """Lower decay envelope of the closed-form solution.

    Args:
        alpha: growth exponent.
        k: growth rate.
        t0: onset time; searched numerically when omitted.

    Returns:
        PolyLower for alpha >= 1/2, StretchedLower for alpha < 1/2.
    """
    _check_params(alpha, k)
    if t0 is None:
        t0 = onset_time(alpha, k)
    if t0 < 0:
        raise ValueError("t0 must be non-negative")

    c4 = 2.0 * math.sqrt(lower_constant(alpha, k))
    if alpha == 0.5:
        return DecayEnvelope(
            kind=EnvelopeKind.POLY_LOWER,
            coefficient=c4,
            poly_exponent=PI2 / k + 1.5 * alpha,
            valid_from=t0,
            k=k,
        )
    beta = 1.0 - 2.0 * alpha
    if alpha > 0.5:
        return DecayEnvelope(
            kind=EnvelopeKind.POLY_LOWER,
            coefficient=c4 * math.exp(PI2 / (k * beta)),
            poly_exponent=alpha / 2.0,
            valid_from=t0,
            k=k,
        )
    # (1+kt)^b - 1 <= (kt)^b for 0 < b < 1
    return DecayEnvelope(
        kind=EnvelopeKind.STRETCHED_LOWER,
        coefficient=c4,
        poly_exponent=alpha / 2.0,
        stretch_rate=PI2 * k ** beta / (k * beta),
        stretch_exponent=beta,
        valid_from=t0,
        k=k,
    )


def upper_envelope(alpha: float, k: float, u0_norm: float = 1.0) -> DecayEnvelope:
    """Upper decay envelope scaled by the initial physical norm."""
    _check_params(alpha, k)
    if u0_norm <= 0:
        raise ValueError("u0_norm must be positive")
    if alpha >= 0.5:
        return DecayEnvelope(
            kind=EnvelopeKind.POLY_UPPER,
            coefficient=u0_norm,
            poly_exponent=alpha / 2.0,
            k=k,
        )
    beta = 1.0 - 2.0 * alpha
    return DecayEnvelope(
        kind=EnvelopeKind.STRETCHED_UPPER,
        coefficient=u0_norm * math.exp(PI2 / (k * beta)),
        stretch_rate=PI2 * k ** beta / (k * beta),
        stretch_exponent=beta,
        k=k,
    )


def evaluate_envelope(env: DecayEnvelope, t: ArrayLike) -> ArrayLike:
    t = np.asarray(t, dtype=float)
    if np.any(t < env.valid_from):
        raise DomainError(f"envelope valid only from t={env.valid_from:g}")
    value = (
        env.coefficient
        * (1.0 + env.k * t) ** (-env.poly_exponent)
        * np.exp(-env.stretch_rate * t ** env.stretch_exponent)
    )
    return float(value) if value.ndim == 0 else value


def energy_envelope(alpha: float, k: float, e0: float, t: ArrayLike) -> ArrayLike:
    """Gronwall bound on the reference energy with Poincare constant pi^2.

    E(t) <= E(0) (1+kt)^(-alpha) exp(-2 pi^2 int_0^t (1+ks)^(-2 alpha) ds)
    """
    _check_params(alpha, k)
    t = np.asarray(t, dtype=float)
    grown = 1.0 + k * t
    if alpha == 0.5:
        integral = np.log(grown) / k
    else:
        beta = 1.0 - 2.0 * alpha
        integral = (grown ** beta - 1.0) / (k * beta)
    value = e0 * grown ** (-alpha) * np.exp(-2.0 * PI2 * integral)
    return float(value) if value.ndim == 0 else value


def closed_loop_envelope(
    params: KernelParams, curve: BoundaryCurve, w0_norm: float, t: ArrayLike
) -> ArrayLike:
    """Bound ||w0|| e^(-lam t) (1 + sqrt(lam) l(t) e^(sqrt(lam) l(t)) / sqrt(2))."""
    root = math.sqrt(params.lam)
    t = np.asarray(t, dtype=float)
    length = np.asarray(boundary_value(curve, t))
    value = w0_norm * np.exp(-params.lam * t) * (
        1.0 + root * length * np.exp(root * length) / math.sqrt(2.0)
    )
    return float(value) if value.ndim == 0 else value
