import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpdecay import expr as ex
from warpdecay.profiles import constant_rate_line, euclidean, exponential_end
from warpdecay.radial import (FitError, RadialSolution, decay_exponent_fit, integrate_radial,
                              normalized_residual, residual, robin_slope, self_consistency,
                              wronskian_log)

r = ex.r


def test_euclidean_three_space_mode():
    # u = sin(k r)/(k r) for n = 3
    lam = 2.0
    k = math.sqrt(lam)
    sol = integrate_radial(euclidean(3), lam, "regular-pole", (0.0, 20.0), tol=1e-12)
    x = np.linspace(0.5, 20.0, 50)
    assert np.allclose(sol(x), np.sin(k * x) / (k * x), atol=1e-9)
    assert np.allclose(sol.derivative(x), (k * x * np.cos(k * x) - np.sin(k * x)) / (k * x * x), atol=1e-9)


def test_renormalization_far_out():
    # u'' + 2u' + 0.75u = 0: inward from r = 1000 the decaying mode grows by exp(1497)
    p = exponential_end(ex.exp(r), 3, 1.0)
    sol = integrate_radial(p, 0.75, "robin-decay", (1000.0, 2.0), tol=1e-11)
    assert np.any(sol.log_scale != 0)
    lg = sol.log_abs(np.array([1000.0]))[0] - sol.log_abs(np.array([2.0]))[0]
    assert lg == pytest.approx(-1.5 * 998.0, rel=1e-9)


def test_robin_slope_roots():
    assert robin_slope(2.0, 0.75, "right") == pytest.approx(-1.5)
    assert robin_slope(-2.0, 0.75, "left") == pytest.approx(1.5)
    with pytest.raises(ValueError):
        robin_slope(1.0, 1.0)


@given(beta=st.floats(0.1, 2.0))
@settings(max_examples=40, deadline=None)
def test_residual_of_exponentials(beta):
    p = exponential_end(ex.exp(r), 3, 1.0)
    w = ex.exp(-beta * r)
    x = np.array([3.0, 10.0])
    expect = -(beta * beta - 2 * beta + 0.75)
    assert np.allclose(normalized_residual(p, 0.75, w, x), expect, atol=1e-12)
    wx = w(x)
    assert np.all(np.abs(residual(p, 0.75, w, x) - expect * wx) <= 1e-12 * wx)


def test_decay_fit_recovers_rate():
    p = exponential_end(ex.exp(r), 3, 1.0)
    sol = integrate_radial(p, 0.75, "robin-decay", (60.0, 2.0))
    fit = decay_exponent_fit(sol, (5.0, 60.0))
    assert fit.gamma == pytest.approx(1.5, abs=1e-9)
    assert abs(fit.log_prefactor_power) < 1e-6


def test_fit_refuses_sign_change():
    sol = integrate_radial(euclidean(3), 4.0, "regular-pole", (0.0, 30.0))
    with pytest.raises(FitError):
        decay_exponent_fit(sol, (2.0, 30.0))
    with pytest.raises(FitError):
        decay_exponent_fit(sol, (0.5, 2.0))


def test_abel_wronskian_drift():
    # f^(n-1) (u1 u2' - u2 u1') is constant along the solution
    p = exponential_end(ex.exp(r + 0.3 * ex.sin(r)), 3, 2.0)
    # oscillatory regime (lam > H^2/4): no cancellation between the two modes
    s1 = integrate_radial(p, 3.0, "value-slope", (1.0, 40.0), data=(1.0, 0.0), tol=1e-12)
    s2 = integrate_radial(p, 3.0, "value-slope", (1.0, 40.0), data=(0.0, 1.0), tol=1e-12)
    x = np.linspace(1.0, 40.0, 200)
    sgn, lw = wronskian_log(p, s1, s2, x)
    assert np.all(sgn == sgn[0])
    assert np.max(np.abs(np.expm1(lw - lw[0]))) <= 1e-6


def test_self_consistency():
    sol = integrate_radial(euclidean(3), 1.0, "regular-pole", (0.0, 10.0), tol=1e-10)
    assert self_consistency(sol) < 1e-9


def test_line_reflection_and_norm():
    p = constant_rate_line(2.0)
    sol = integrate_radial(p, 0.75, "robin-decay", (-30.0, 0.0))
    ref = sol.reflected()
    assert ref.span == (0.0, 30.0)
    # H = +2 on the left end: the L^2 branch grows like exp(0.5 |t|)
    fit = decay_exponent_fit(ref, (3.0, 30.0))
    assert fit.gamma == pytest.approx(-0.5, abs=1e-8)
    assert math.isfinite(sol.log_l2_norm(p))


def test_csv_output(tmp_path):
    sol = RadialSolution.from_samples([1.0, 2.0], [1.0, 0.5], [0.0, -0.5])
    sol.to_csv(tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text()
    assert "r,u,du" in text and "log_scale" not in text


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate_radial(euclidean(3), 1.0, "dirichlet", (0.0, 1.0))
    with pytest.raises(ValueError):
        integrate_radial(euclidean(3), 1.0, "regular-pole", (0.0, 1.0), tol=0.0)
    with pytest.raises(ValueError):
        integrate_radial(euclidean(3), 1.0, "value-slope", (-1.0, 1.0))
