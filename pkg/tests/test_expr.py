import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpdecay import expr as ex
from warpdecay.expr import ExprSyntaxError, parse, smooth_step

r = ex.r


def fd(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


SAMPLES = [
    ex.exp(2.0 * r) * ex.sin(r),
    ex.log(1.0 + r * r) / (r + 3.0),
    ex.sqrt(r) * ex.cosh(0.5 * r) - ex.sinh(r) ** 3,
    ex.power(r + 1.0, 0.7),
]


@pytest.mark.parametrize("e", SAMPLES)
@given(x=st.floats(0.2, 3.0))
@settings(max_examples=30, deadline=None)
def test_structural_derivative_matches_finite_difference(e, x):
    d = e.diff()
    assert d(x) == pytest.approx(fd(e, x), rel=1e-6, abs=1e-8)
    assert e.diff(2)(x) == pytest.approx(fd(d, x), rel=1e-6, abs=1e-7)


def test_constant_folding():
    assert (r * 0.0) == ex.const(0.0)
    assert (r * 1.0) == r
    assert (ex.const(2.0) + 3.0) == ex.const(5.0)
    assert ex.const(5.0).diff() == ex.const(0.0)


def test_vector_and_scalar_agree():
    e = SAMPLES[0]
    x = np.linspace(0.1, 2.0, 17)
    assert np.allclose(e(x), [e(float(t)) for t in x], rtol=0, atol=1e-14)


def test_log_of_survives_overflow():
    e = ex.exp(2000.0 * r)
    lg = ex.log_of(e)
    assert lg(1.0) == pytest.approx(2000.0)
    assert not math.isfinite(e(1.0)) or e(1.0) > 1e300


@pytest.mark.parametrize("e", SAMPLES + [ex.step((r - 1.0) / 2.0, 1), ex.integral(ex.cos(r), 0.0, 2.0)])
def test_print_parse_round_trip(e):
    assert parse(str(e)) == e


@pytest.mark.parametrize("bad", ["", "r +", "foo(r)", "exp(r", "1 ** ", "r $ 2"])
def test_parse_rejects(bad):
    with pytest.raises(ExprSyntaxError):
        parse(bad)


def test_smooth_step_shape():
    x = np.linspace(-0.5, 1.5, 401)
    y = smooth_step(x)
    assert np.all(y[x <= 0] == 0) and np.all(y[x >= 1] == 1)
    assert np.all(np.diff(y) >= 0)
    assert smooth_step(0.5) == pytest.approx(0.5)
    # psi(x) + psi(1 - x) = 1
    t = np.linspace(0.01, 0.99, 50)
    assert np.allclose(smooth_step(t) + smooth_step(1 - t), 1.0, atol=1e-15)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_smooth_step_derivatives(order):
    for x in (0.2, 0.47, 0.8):
        num = fd(lambda t: smooth_step(t, order - 1), x, 1e-6)
        assert smooth_step(x, order) == pytest.approx(num, rel=1e-5, abs=1e-7)


def test_running_integral_against_closed_form():
    I = ex.integral(ex.cos(r) * ex.exp(r), 0.0, 3.0)

    def exact(x):
        return (math.exp(x) * (math.sin(x) + math.cos(x)) - 1) / 2

    for x in (0.0, 0.37, 1.5, 3.0):
        assert I(x) == pytest.approx(exact(x), abs=1e-13)
    xs = np.linspace(0, 3, 9)
    assert np.allclose(I(xs), [exact(x) for x in xs], atol=1e-13)
    assert I.diff()(1.1) == pytest.approx(math.cos(1.1) * math.exp(1.1))
    assert math.isnan(I(3.5))
