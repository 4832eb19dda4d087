import math

import numpy as np
import pytest
from scipy import special

from exceptions import DomainError
from services.analytic_service import (
    AnalyticSolution,
    DecayEnvelope,
    EnvelopeKind,
    analytic_l2_norm,
    energy_envelope,
    evaluate_envelope,
    exact_solution,
    heat_residual,
    initial_datum,
    lower_constant,
    lower_envelope,
    onset_time,
    upper_envelope,
)
from services.boundary_service import boundary_value


def test_solution_vanishes_on_left_edge():
    assert exact_solution(AnalyticSolution(alpha=0.5, k=1.0), 0.0, 5.0) == 0.0


def test_initial_trace_log_branch():
    value = exact_solution(AnalyticSolution(alpha=0.5, k=1.0), 0.5, 0.0)
    assert value == pytest.approx(math.exp(-0.03125), rel=1e-14)


def test_general_branch_independent_form():
    # for alpha = 1 the closed form simplifies to sin(pi x/L) L^-1/2 exp(pi^2 (1/L - 1)/k - k x^2/(4L))
    sol = AnalyticSolution(alpha=1.0, k=1.0)
    length = 2.0
    expected = math.sin(math.pi / length) / math.sqrt(length) * math.exp(
        math.pi ** 2 * (1 / length - 1) - 1 / (4 * length)
    )
    assert exact_solution(sol, 1.0, 1.0) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("k", [0.5, 1.0])
@pytest.mark.parametrize("t", [1.0, 10.0])
def test_solution_vanishes_at_both_edges(alpha, k, t):
    sol = AnalyticSolution(alpha=alpha, k=k)
    length = boundary_value(sol.curve, t)
    assert abs(exact_solution(sol, 0.0, t)) <= 1e-13
    assert abs(exact_solution(sol, length, t)) <= 1e-13


def test_outside_domain_rejected():
    sol = AnalyticSolution(alpha=1.0, k=1.0)
    with pytest.raises(DomainError):
        exact_solution(sol, 2.5, 1.0)
    with pytest.raises(DomainError):
        exact_solution(sol, -0.1, 1.0)


def test_initial_datum_matches_closed_form():
    sol = AnalyticSolution(alpha=1.0, k=0.5)
    y = np.linspace(0.0, 1.0, 11)
    expected = np.sin(np.pi * y) * np.exp(-0.5 * y ** 2 / 4)
    assert np.allclose(initial_datum(sol, y), expected, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("k", [0.5, 1.0])
@pytest.mark.parametrize("t", [1.0, 10.0])
def test_heat_residual_second_order_for_linear_growth(k, t):
    sol = AnalyticSolution(alpha=1.0, k=k)
    length = boundary_value(sol.curve, t)
    x = np.linspace(0.2, 0.8, 13) * length
    scale = np.max(np.abs(exact_solution(sol, x, t)))
    coarse = np.max(np.abs(heat_residual(sol, x, t, 1e-2)))
    fine = np.max(np.abs(heat_residual(sol, x, t, 5e-3)))
    assert fine < coarse
    assert coarse / fine == pytest.approx(4.0, rel=0.1)
    assert fine <= 1e-3 * scale


def test_heat_residual_reported_for_other_exponents():
    sol = AnalyticSolution(alpha=0.5, k=1.0)
    x = np.linspace(0.2, 0.8, 7) * boundary_value(sol.curve, 1.0)
    residual = heat_residual(sol, x, 1.0, 1e-3)
    assert np.all(np.isfinite(residual))
    assert np.max(np.abs(residual)) > 0


def test_lower_envelope_log_branch_exponent():
    env = lower_envelope(0.5, math.pi ** 2, t0=0.0)
    assert env.kind == EnvelopeKind.POLY_LOWER
    assert env.poly_exponent == pytest.approx(1.75)


def test_lower_envelope_linear_growth_exponent():
    env = lower_envelope(1.0, 1.0, t0=0.0)
    assert env.kind == EnvelopeKind.POLY_LOWER
    assert env.poly_exponent == pytest.approx(0.5)
    c4 = 2 * math.sqrt(lower_constant(1.0, 1.0))
    assert env.coefficient == pytest.approx(c4 * math.exp(-math.pi ** 2))


def test_lower_constant_value():
    # (2/(k alpha))^(3/2) (sqrt(pi) - 1) / 8
    assert lower_constant(0.5, 1.0) == pytest.approx(0.7724538509055159, rel=1e-12)
    assert lower_constant(1.0, 1.0) == pytest.approx(2 ** 1.5 * (math.sqrt(math.pi) - 1) / 8)
    assert lower_constant(1.0, 1.0) == pytest.approx(0.27310, abs=1e-5)


def test_lower_envelope_slow_growth_is_stretched():
    env = lower_envelope(0.25, 1.0, t0=0.0)
    assert env.kind == EnvelopeKind.STRETCHED_LOWER
    assert env.stretch_exponent == pytest.approx(0.5)
    assert env.poly_exponent == pytest.approx(0.125)
    assert env.stretch_rate == pytest.approx(2 * math.pi ** 2)


@pytest.mark.parametrize("alpha, k", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_envelopes_reject_bad_parameters(alpha, k):
    with pytest.raises(ValueError):
        lower_envelope(alpha, k, t0=0.0)
    with pytest.raises(ValueError):
        upper_envelope(alpha, k)


def test_upper_envelope_examples():
    env = upper_envelope(1.0, 0.5)
    assert env.kind == EnvelopeKind.POLY_UPPER and env.poly_exponent == pytest.approx(0.5)
    env = upper_envelope(0.25, 1.0)
    assert env.kind == EnvelopeKind.STRETCHED_UPPER and env.stretch_exponent == pytest.approx(0.5)
    env = upper_envelope(0.5, 2.0)
    assert env.kind == EnvelopeKind.POLY_UPPER and env.poly_exponent == pytest.approx(0.25)


def test_evaluate_envelope_examples():
    poly = DecayEnvelope(kind=EnvelopeKind.POLY_LOWER, coefficient=1.0, poly_exponent=0.5, k=1.0)
    assert evaluate_envelope(poly, 3.0) == pytest.approx(0.5)
    stretched = DecayEnvelope(
        kind=EnvelopeKind.STRETCHED_UPPER, coefficient=1.0, stretch_rate=1.0, stretch_exponent=0.5
    )
    assert evaluate_envelope(stretched, 4.0) == pytest.approx(math.exp(-2.0))
    flat = DecayEnvelope(kind=EnvelopeKind.POLY_UPPER, coefficient=7.0)
    assert evaluate_envelope(flat, 0.0) == 7.0


def test_evaluate_envelope_before_onset_rejected():
    env = DecayEnvelope(kind=EnvelopeKind.POLY_LOWER, coefficient=1.0, valid_from=5.0)
    with pytest.raises(DomainError):
        evaluate_envelope(env, 4.0)


def test_envelopes_non_increasing():
    times = np.linspace(10.0, 200.0, 300)
    for alpha, k in [(0.25, 1.0), (0.5, 1.0), (1.0, 0.5)]:
        for env in (lower_envelope(alpha, k, t0=10.0), upper_envelope(alpha, k)):
            values = evaluate_envelope(env, times)
            assert np.all(values > 0)
            assert np.all(np.diff(values) <= 0)


def test_onset_time_conditions():
    t0 = onset_time(1.0, 0.5)
    y = math.sqrt(0.25) * (1 + 0.5 * t0) / 2
    assert y * math.exp(-y * y) / 2 <= 0.125
    assert special.erf(y) >= 0.5
    earlier = math.sqrt(0.25) * (1 + 0.5 * (t0 - 0.1)) / 2
    assert special.erf(earlier) < 0.5 or earlier * math.exp(-earlier ** 2) / 2 > 0.125


def test_onset_time_not_reached():
    with pytest.raises(DomainError):
        onset_time(0.25, 1.0)


def test_sandwich_for_linear_growth():
    sol = AnalyticSolution(alpha=1.0, k=0.5)
    lower = lower_envelope(1.0, 0.5)
    upper = upper_envelope(1.0, 0.5, u0_norm=analytic_l2_norm(sol, 0.0))
    for t in np.linspace(lower.valid_from, 100.0, 25):
        norm = analytic_l2_norm(sol, t)
        assert evaluate_envelope(lower, t) <= norm <= evaluate_envelope(upper, t)


def test_energy_envelope_dominates_power_bound():
    times = np.linspace(0.0, 50.0, 51)
    bound = energy_envelope(1.0, 1.0, 2.0, times)
    assert bound[0] == pytest.approx(2.0)
    assert np.all(bound <= 2.0 * (1 + times) ** -1.0 + 1e-15)
