import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifoldsteer.errors import DivergentWeight, ToleranceNotMet
from manifoldsteer.quadrature import ExpWeightedIntegral, exp_integral, integrate_decaying, truncation_window

LAM = 2 * math.pi ** 2


def one(t):
    return np.ones(np.shape(t))


def test_semi_infinite_constant():
    assert exp_integral(one, -2.0, 0.0, math.inf) == pytest.approx(0.5, abs=1e-10)


def test_finite_window_constant():
    assert exp_integral(one, -1.0, 0.0, 3.0) == pytest.approx(1 - math.exp(-3), abs=1e-10)


@pytest.mark.parametrize("t", [0.0, 0.3, -1.2])
def test_cosine_closed_form(t):
    w = 2 * math.pi
    want = (LAM * math.cos(w * t) - w * math.sin(w * t)) / (LAM ** 2 + w ** 2)
    # weight measured from t, i.e. the unshifted integral times e^{LAM t}
    got = exp_integral(lambda s: np.cos(w * s), -LAM, t, math.inf, shift=t)
    assert got == pytest.approx(want, abs=1e-10)
    if t == 0.0:
        assert got == pytest.approx(LAM / (LAM ** 2 + w ** 2), abs=1e-10)


def test_cosine_against_fine_trapezoid():
    w = 2 * math.pi
    s = np.linspace(0, 3, 600_001)
    ref = np.trapezoid(np.exp(-LAM * s) * np.cos(w * s), s) if hasattr(np, "trapezoid") else np.trapz(np.exp(-LAM * s) * np.cos(w * s), s)
    assert exp_integral(lambda t: np.cos(w * t), -LAM, 0.0, math.inf) == pytest.approx(ref, abs=1e-9)


def test_negative_infinite_lower_endpoint():
    # int_{-inf}^0 e^{tau} dtau = 1
    assert exp_integral(one, 1.0, -math.inf, 0.0) == pytest.approx(1.0, abs=1e-10)


def test_reversed_limits_change_sign():
    a = exp_integral(np.cos, -1.0, 0.0, 2.0)
    b = exp_integral(np.cos, -1.0, 2.0, 0.0)
    assert a == pytest.approx(-b, abs=1e-14)


@pytest.mark.parametrize("rate, lo, hi", [(1.0, 0.0, math.inf), (-1.0, -math.inf, 0.0), (-1.0, -math.inf, math.inf)])
def test_divergent_weight(rate, lo, hi):
    with pytest.raises(DivergentWeight):
        exp_integral(one, rate, lo, hi)


def test_unreachable_tolerance_raises_instead_of_exhausting_memory():
    # weight ~1e10 against an absolute tolerance of 1e-10
    with pytest.raises(ToleranceNotMet):
        exp_integral(np.cos, -LAM, -1.2, math.inf)


def test_tolerance_not_met():
    rng = np.random.default_rng(0)
    noise = lambda t: rng.standard_normal(np.shape(t))  # nowhere smooth
    with pytest.raises(ToleranceNotMet):
        exp_integral(noise, -1.0, 0.0, 1.0, abs_tol=1e-14)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=20, deadline=None)
def test_linearity(a, b):
    u = lambda t: np.sin(3 * t)
    v = lambda t: np.cos(t) ** 2
    lhs = exp_integral(lambda t: a * u(t) + b * v(t), -4.0, 0.0, math.inf)
    rhs = a * exp_integral(u, -4.0, 0.0, math.inf) + b * exp_integral(v, -4.0, 0.0, math.inf)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_window_monotone_for_nonnegative_integrand():
    h = lambda t: 1 + np.sin(t) ** 2
    vals = [exp_integral(h, -1.0, 0.0, T) for T in (0.5, 1.0, 2.0, 4.0, math.inf)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_truncation_consistency():
    spec = ExpWeightedIntegral(-3.0, np.cos, 0.0, math.inf)
    lo, hi = truncation_window(spec)
    base = integrate_decaying(spec)
    doubled = exp_integral(np.cos, -3.0, 0.0, lo + 2 * (hi - lo))
    assert abs(base - doubled) < 1e-12
    assert math.exp(-3.0 * (hi - lo)) == pytest.approx(1e-14)
