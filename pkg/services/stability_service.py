"""
Decay-model fits of a norm history and regime classification.

    exponential            ||u|| ~ C exp(-r t)
    analogous exponential  ||u|| ~ C exp(-C1 t^beta), 0 < beta < 1
    polynomial             ||u|| ~ C (1+kt)^(-gamma)
"""
import logging
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize, stats

from services.solver_service import DecayTrace

logger = logging.getLogger(__name__)

MIN_SAMPLES = 10
# linear and homogeneous schemes keep relative precision down to the subnormal range
NORM_FLOOR = 1e-280
BETA_BOUNDS = (0.05, 0.95)
# stretched exponents outside this band mimic the neighbouring regimes
BETA_ACCEPTED = (0.2, 0.9)
TIE_MARGIN = 0.005
MIN_R_SQUARED = 0.9


class Regime(str, Enum):
    EXPONENTIAL = "Exponential"
    ANALOGOUS_EXPONENTIAL = "AnalogousExponential"
    POLYNOMIAL = "Polynomial"
    UNDETERMINED = "Undetermined"


# strongest first
LADDER = (Regime.EXPONENTIAL, Regime.ANALOGOUS_EXPONENTIAL, Regime.POLYNOMIAL)


class DecayFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    regime: Regime
    rate: float
    stretch_exponent: Optional[float] = None
    r_squared: float = Field(..., ge=0, le=1)
    window: tuple[float, float]
    candidates: dict[str, tuple[float, float]] = Field(default_factory=dict)


def default_window(trace: DecayTrace) -> tuple[float, float]:
    end = float(trace.times()[-1])
    return end / 5.0, end


def _window_data(trace: DecayTrace, window: Optional[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    start, end = window if window is not None else default_window(trace)
    times, norms = trace.times(), trace.norms()
    inside = (times >= start) & (times <= end)
    times, norms = times[inside], norms[inside]
    if np.any(norms <= 0):
        raise ValueError("non-positive norms in fitting window")
    kept = norms >= NORM_FLOOR
    if np.count_nonzero(kept) < MIN_SAMPLES:
        raise ValueError(
            f"need at least {MIN_SAMPLES} samples in window [{start:g}, {end:g}], got {np.count_nonzero(kept)}"
        )
    return times[kept], np.log(norms[kept])


def _line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Slope and R^2 of the least-squares line."""
    result = stats.linregress(x, y)
    r_squared = result.rvalue ** 2 if np.isfinite(result.rvalue) else 0.0
    return float(result.slope), float(min(max(r_squared, 0.0), 1.0))


def fit_exponential(trace: DecayTrace, window: Optional[tuple[float, float]] = None) -> tuple[float, float]:
    """Rate r and R^2 of log||u|| against t."""
    t, log_norm = _window_data(trace, window)
    slope, r_squared = _line(t, log_norm)
    return -slope, r_squared


def fit_polynomial(
    trace: DecayTrace, window: Optional[tuple[float, float]] = None, k: float = 1.0
) -> tuple[float, float]:
    """Exponent gamma and R^2 of log||u|| against log(1+kt)."""
    t, log_norm = _window_data(trace, window)
    slope, r_squared = _line(np.log1p(k * t), log_norm)
    return -slope, r_squared


def fit_stretched(
    trace: DecayTrace,
    window: Optional[tuple[float, float]] = None,
    beta_hint: Optional[float] = None,
) -> tuple[float, float, float]:
    """C1, beta and R^2 of log||u|| against t^beta.

    Without beta_hint, beta maximizes R^2 over [0.05, 0.95] by bounded
    golden-section search with parabolic steps.
    """
    if beta_hint is not None and not 0 < beta_hint < 1:
        raise ValueError("beta_hint must lie in (0, 1)")
    t, log_norm = _window_data(trace, window)

    def r_squared_at(beta: float) -> float:
        return _line(t ** beta, log_norm)[1]

    if beta_hint is None:
        result = optimize.minimize_scalar(
            lambda beta: -r_squared_at(beta),
            bounds=BETA_BOUNDS,
            method="bounded",
            options={"xatol": 1e-5},
        )
        beta = float(result.x)
    else:
        beta = beta_hint
    slope, r_squared = _line(t ** beta, log_norm)
    return -slope, beta, r_squared


def classify(
    trace: DecayTrace,
    k: float = 1.0,
    alpha: Optional[float] = None,
    window: Optional[tuple[float, float]] = None,
) -> DecayFit:
    """Fit all three models and pick the regime.

    The highest R^2 wins; models within 0.005 of the best defer to the
    stronger regime. Below R^2 = 0.9 everywhere the regime is Undetermined.
    """
    window = window if window is not None else default_window(trace)
    rate_exp, r2_exp = fit_exponential(trace, window)
    gamma, r2_poly = fit_polynomial(trace, window, k)
    c1, beta, r2_stretched = fit_stretched(trace, window)

    candidates = {
        Regime.EXPONENTIAL.value: (rate_exp, r2_exp),
        Regime.ANALOGOUS_EXPONENTIAL.value: (c1, r2_stretched),
        Regime.POLYNOMIAL.value: (gamma, r2_poly),
    }
    eligible = {
        Regime.EXPONENTIAL: (rate_exp, r2_exp),
        Regime.POLYNOMIAL: (gamma, r2_poly),
    }
    if BETA_ACCEPTED[0] <= beta <= BETA_ACCEPTED[1]:
        eligible[Regime.ANALOGOUS_EXPONENTIAL] = (c1, r2_stretched)
    else:
        logger.debug("stretched fit degenerate (beta=%.3f), excluded", beta)
    eligible = {regime: fit for regime, fit in eligible.items() if fit[0] > 0}

    if not eligible or max(fit[1] for fit in eligible.values()) < MIN_R_SQUARED:
        best = max((fit[1] for fit in eligible.values()), default=0.0)
        return DecayFit(
            regime=Regime.UNDETERMINED, rate=0.0, r_squared=best, window=window, candidates=candidates
        )

    best = max(fit[1] for fit in eligible.values())
    regime = next(r for r in LADDER if r in eligible and eligible[r][1] >= best - TIE_MARGIN)
    rate, r_squared = eligible[regime]
    if alpha is not None:
        logger.debug(
            "alpha=%g: growth theory expects %s without control, fitted %s",
            alpha,
            Regime.POLYNOMIAL.value if alpha >= 0.5 else Regime.ANALOGOUS_EXPONENTIAL.value,
            regime.value,
        )
    return DecayFit(
        regime=regime,
        rate=rate,
        stretch_exponent=beta if regime == Regime.ANALOGOUS_EXPONENTIAL else None,
        r_squared=r_squared,
        window=window,
        candidates=candidates,
    )
