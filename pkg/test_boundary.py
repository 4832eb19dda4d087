import numpy as np
import pytest

from exceptions import DomainError
from services.boundary_service import (
    BoundaryCurve,
    CurveKind,
    boundary_slope,
    boundary_value,
    first_collapse,
    reference_coefficients,
    to_physical,
    to_reference,
)


@pytest.mark.parametrize("alpha, k, t, expected", [(1.0, 0.5, 0.0, 1.0), (1.0, 1.0, 2.0, 3.0), (0.5, 2.0, 4.0, 3.0)])
def test_power_law_value(alpha, k, t, expected):
    assert boundary_value(BoundaryCurve(alpha=alpha, k=k), t) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("kind", list(CurveKind))
def test_every_curve_starts_at_one(kind):
    assert boundary_value(BoundaryCurve(kind=kind), 0.0) == 1.0


def test_slope_examples():
    assert boundary_slope(BoundaryCurve(alpha=1.0, k=0.5), 7.0) == pytest.approx(0.5)
    assert boundary_slope(BoundaryCurve(alpha=0.5, k=2.0), 0.0) == pytest.approx(1.0)
    assert boundary_slope(BoundaryCurve(kind=CurveKind.SINUSOIDAL), 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("kind", list(CurveKind))
@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_slope_matches_centered_difference(kind, t):
    curve = BoundaryCurve(kind=kind, alpha=0.75, k=0.8)
    step = 1e-5
    numeric = (boundary_value(curve, t + step) - boundary_value(curve, t - step)) / (2 * step)
    assert numeric == pytest.approx(boundary_slope(curve, t), rel=1e-6)


def test_power_law_strictly_increasing():
    times = np.linspace(0.0, 100.0, 1001)
    for alpha in (0.25, 0.5, 1.0, 2.0):
        values = boundary_value(BoundaryCurve(alpha=alpha, k=0.5), times)
        assert np.all(np.diff(values) > 0)


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        boundary_value(BoundaryCurve(), -0.1)
    with pytest.raises(DomainError):
        boundary_slope(BoundaryCurve(), -1.0)


def test_parameters_validated():
    with pytest.raises(ValueError):
        BoundaryCurve(alpha=0.0)
    with pytest.raises(ValueError):
        BoundaryCurve(k=-1.0)


def test_coordinate_examples():
    curve = BoundaryCurve(alpha=1.0, k=1.0)
    assert to_reference(curve, 3.0, 2.0) == 1.0
    assert to_reference(curve, 0.0, 2.0) == 0.0
    assert to_reference(curve, 1.5, 2.0) == pytest.approx(0.5)


def test_coordinate_round_trip():
    rng = np.random.default_rng(7)
    curve = BoundaryCurve(alpha=0.75, k=0.5)
    y = rng.uniform(0.0, 1.0, 200)
    for t in np.linspace(0.0, 100.0, 11):
        back = to_reference(curve, to_physical(curve, y, t), t)
        assert np.max(np.abs(back - y)) <= 1e-14


def test_coordinates_outside_domain_rejected():
    curve = BoundaryCurve(alpha=1.0, k=1.0)
    with pytest.raises(DomainError):
        to_reference(curve, 3.5, 2.0)
    with pytest.raises(DomainError):
        to_physical(curve, 1.2, 2.0)


def test_reference_coefficients_power_law():
    curve = BoundaryCurve(alpha=1.0, k=0.5)
    drift, diffusivity = reference_coefficients(curve, 2.0)
    assert drift == pytest.approx(0.25)
    assert diffusivity == pytest.approx(0.25)


def test_sinusoidal_curve_collapses():
    curve = BoundaryCurve(kind=CurveKind.SINUSOIDAL)
    assert not curve.is_monotone
    assert first_collapse(curve, 4.0) is None
    assert first_collapse(curve, 5.0) == pytest.approx(1.5 * np.pi)
    assert first_collapse(BoundaryCurve(), 1e6) is None
