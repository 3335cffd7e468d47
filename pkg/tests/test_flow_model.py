import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifoldsteer.errors import NoConvergence, NotSaddle
from manifoldsteer.flow_model import (
    BumpFunction,
    PlanarVelocityField,
    SaddleFrame,
    bump_eval,
    constant,
    cosine,
    find_saddle,
    linear_field,
    perp,
    rotate,
    smoothed_ramp,
    smoothed_step,
    superpose,
    tabulated,
    taylor_green,
)

from conftest import PI2, tg_with_g

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("v, want", [((1, 0), (0, 1)), ((0, 1), (-1, 0)), ((0.6, 0.8), (-0.8, 0.6))])
def test_perp_examples(v, want):
    np.testing.assert_array_equal(perp(v), want)


@given(finite, finite)
def test_perp_twice_is_negation(a, b):
    v = np.array([a, b])
    np.testing.assert_array_equal(perp(perp(v)), -v)
    p = perp(v)
    assert p[0] * v[0] + p[1] * v[1] == 0.0


def test_taylor_green_values(tg):
    np.testing.assert_allclose(tg.eval_f([0.5, 0.5]), [0, 0], atol=1e-15)
    np.testing.assert_allclose(tg.eval_f([1.0, 0.0]), [0, 0], atol=1e-15)
    np.testing.assert_allclose(tg.jacobian_f([1.0, 0.0]), np.diag([PI2, -PI2]), atol=1e-12)
    assert tg.domain == ((0.0, 2.0), (0.0, 1.0))
    np.testing.assert_array_equal(tg.eval_g([0.3, 0.4], 1.0), [0, 0])


def test_taylor_green_analytic_jacobian_matches_differences(tg):
    x = np.array([[0.3, 0.7], [1.2, 0.1]])
    fd = PlanarVelocityField(f=tg.f, domain=tg.domain)
    np.testing.assert_allclose(tg.jacobian_f(x), fd.jacobian_f(x), atol=1e-7)
    assert tg.jacobian_mode == "analytic" and fd.jacobian_mode == "finite-difference"


def test_find_saddle_taylor_green(tg_low, tg_high, tg):
    np.testing.assert_allclose(tg_low.a, [1, 0], atol=1e-12)
    np.testing.assert_allclose(tg_high.a, [1, 1], atol=1e-12)
    for fr in (tg_low, tg_high):
        assert np.linalg.norm(tg.eval_f(fr.a)) < 1e-12
        assert abs(fr.lambda_u - PI2) < 1e-8 and abs(fr.lambda_s + PI2) < 1e-8
        J = tg.jacobian_f(fr.a)
        assert np.linalg.norm(J @ fr.v_s - fr.lambda_s * fr.v_s) < 1e-8
        assert np.linalg.norm(J @ fr.v_u - fr.lambda_u * fr.v_u) < 1e-8
        assert abs(fr.v_s @ fr.v_u) < 1e-12
        assert fr.v_s @ fr.v_s_perp == 0.0
    np.testing.assert_allclose(tg_low.v_s, [0, 1], atol=1e-12)
    np.testing.assert_allclose(tg_low.v_u, [1, 0], atol=1e-12)
    np.testing.assert_allclose(tg_high.v_u, [0, 1], atol=1e-12)


def test_find_saddle_linear():
    fr = find_saddle(linear_field([[1, 0], [0, -1]]), (0.3, -0.2))
    np.testing.assert_allclose(fr.a, [0, 0], atol=1e-14)
    assert fr.lambda_u == pytest.approx(1) and fr.lambda_s == pytest.approx(-1)
    np.testing.assert_allclose(fr.v_u, [1, 0])
    np.testing.assert_allclose(fr.v_s, [0, 1])


def test_sign_convention_first_nonzero_positive():
    fr = SaddleFrame.from_jacobian([0, 0], np.array([[0.0, 1.0], [1.0, 0.0]]))
    for v in (fr.v_s, fr.v_u):
        first = v[np.flatnonzero(np.abs(v) > 1e-14)[0]]
        assert first > 0


def test_not_saddle():
    with pytest.raises(NotSaddle):
        find_saddle(linear_field([[-1, 0], [0, -2]]), (0.1, 0.1))
    with pytest.raises(NotSaddle):
        find_saddle(linear_field([[0, 1], [-1, 0]]), (0.1, 0.1))


def test_no_convergence():
    fld = PlanarVelocityField(f=lambda x: np.stack([np.ones(np.shape(x)[:-1]), np.zeros(np.shape(x)[:-1])], -1),
                              domain=((-1, 1), (-1, 1)))
    with pytest.raises(NoConvergence):
        find_saddle(fld, (0.0, 0.0))


def test_zero_extension_outside_window():
    fld = tg_with_g(lambda x, t: np.ones(np.broadcast_shapes(np.shape(x), np.shape(t) + (2,))), window=(-1.0, 1.0))
    np.testing.assert_array_equal(fld.eval_g([0.5, 0.5], 1.5), [0, 0])
    np.testing.assert_array_equal(fld.eval_g([0.5, 0.5], 0.5), [1, 1])
    x = np.array([0.3, 0.2])
    np.testing.assert_array_equal(fld.velocity(x, 0.5), fld.eval_f(x) + fld.eval_g(x, 0.5))
    np.testing.assert_array_equal(fld.eval_f(x), fld.eval_f(x))


def test_superpose_adds_extras_into_g(tg):
    c = tg_with_g(lambda x, t: np.broadcast_to([0.1, 0.0], np.broadcast_shapes(np.shape(x), np.shape(t) + (2,))))
    s = superpose(tg, PlanarVelocityField(f=lambda x: np.zeros(np.shape(x)), g=c.g, domain=tg.domain))
    x = np.array([0.4, 0.6])
    np.testing.assert_allclose(s.velocity(x, 0.0), tg.eval_f(x) + [0.1, 0.0])


@pytest.mark.parametrize("r, want, tol", [(0.0, math.tanh(5.0), 1e-15), (0.2, 0.5 * math.tanh(10.0), 1e-15)])
def test_bump_examples(r, want, tol):
    b = BumpFunction(np.array([1.0, 0.0]), 0.2)
    assert bump_eval(b, [1.0 + r, 0.0]) == pytest.approx(want, abs=tol)
    assert math.tanh(5.0) == pytest.approx(0.999909, abs=1e-6)


def test_bump_far_field_vanishes():
    b = BumpFunction(np.array([1.0, 0.0]), 0.2)
    assert bump_eval(b, [2.0, 0.0]) < 1e-15


@given(st.floats(0.05, 0.5), st.floats(0, math.pi))
@settings(max_examples=30)
def test_bump_monotone_radial(delta, ang):
    b = BumpFunction(np.zeros(2), delta)
    r = np.linspace(0, 3 * delta, 200)
    pts = np.stack([r * math.cos(ang), r * math.sin(ang)], -1)
    vals = b(pts)
    assert np.all(np.diff(vals) <= 1e-15)
    assert np.all(vals <= math.tanh(1 / delta) + 1e-15)
    np.testing.assert_allclose(vals, b(np.stack([r, np.zeros_like(r)], -1)), rtol=1e-13, atol=1e-300)


def test_bump_gradient_vanishes_at_center_and_matches_fd():
    b = BumpFunction(np.array([1.0, 0.0]), 0.2)
    np.testing.assert_array_equal(b.gradient(np.array([1.0, 0.0])), [0.0, 0.0])
    x = np.array([1.13, 0.07])
    h = 1e-6
    fd = [(b(x + e) - b(x - e)) / (2 * h) for e in (np.array([h, 0]), np.array([0, h]))]
    np.testing.assert_allclose(b.gradient(x), fd, rtol=1e-6)


@pytest.mark.parametrize("sig", [
    cosine(0.2, 2 * math.pi, 0.3),
    smoothed_step(0.1, 0.5, 0.01),
    smoothed_ramp(0.2, 0.5, 0.25, 0.75, 0.01),
    constant(3.0),
])
def test_signal_derivatives_match_differences(sig):
    t = np.linspace(-1, 2, 61)
    h = 1e-5
    fd = (sig.value(t + h) - sig.value(t - h)) / (2 * h)
    d = sig.derivative(t)
    scale = np.maximum(np.abs(d), 1e-3 * np.max(np.abs(d)) if np.any(d) else 1.0)
    assert np.all(np.abs(fd - d) / scale < 1e-6)


def test_tabulated_signal():
    ts = np.linspace(0, 1, 11)
    sig = tabulated(ts, ts ** 2)
    assert sig.value(0.55) == pytest.approx(0.5 * (0.25 + 0.36))
    assert sig.derivative(0.5) == pytest.approx(1.0)
    assert sig.derivative(0.0) == pytest.approx(0.1)  # one-sided at the edge
    with pytest.raises(ValueError):
        tabulated([0, 0], [1, 2])


def test_rotate():
    np.testing.assert_allclose(rotate([0.0, 1.0], 0.2), [-math.sin(0.2), math.cos(0.2)])
