import math

import numpy as np
import pytest
from scipy.special import jn_zeros

from warpdecay.models import (build_prop12, build_prop13, build_remark61, euclidean_ball_mode)
from warpdecay.profiles import distance_mean_curvature, mean_curvature
from warpdecay.radial import residual


def test_ball_radius_three_dimensions():
    R0, v1 = euclidean_ball_mode(3, 0.75)
    assert R0 == pytest.approx(math.pi / math.sqrt(0.75), abs=1e-12)
    assert v1(0.0) == 1.0
    assert abs(v1(R0)) < 1e-12


def test_ball_radius_against_bessel_zero():
    R0, _ = euclidean_ball_mode(2, 0.75)
    assert R0 == pytest.approx(jn_zeros(0, 1)[0] / math.sqrt(0.75), abs=1e-12)


def test_prop12_manifest():
    c = build_prop12()
    m = c.manifest()
    assert m["a0"] == 1.5 and m["ess_bottom"] == 1.0
    assert c.r0 == pytest.approx(math.pi / math.sqrt(0.75))
    x = np.linspace(c.r0, c.r0 + 50, 20)
    assert np.max(np.abs(mean_curvature(c.f, x) - 2.0)) < 1e-9
    assert c.validation["v0_monotone"]


def test_prop12_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_prop12(lambda0=1.0)
    with pytest.raises(ValueError):
        build_prop12(kappa=-1.0)


def test_prop13_structure():
    c = build_prop13()
    assert c.R1 == pytest.approx(math.pi / (2 * math.sqrt(0.75)))
    assert c.exponents == pytest.approx((0.5, 1.5))
    t = np.linspace(-30.0, 30.0, 4001)
    phi_ok = np.abs(residual(c.f, 0.75, c.phi.pieces[0].expr, t[t < 0]))
    assert np.max(phi_ok) <= 1e-8


def test_prop13_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        build_prop13(epsilon=2.0)


def test_remark61_curvature():
    f = build_remark61()
    x = np.geomspace(2.0, 1e5, 50)
    assert np.allclose(distance_mean_curvature(f, x), 2.0 - 2.0 / (4.0 * x * x), rtol=0, atol=1e-13)
    with pytest.raises(ValueError):
        build_remark61(delta=0.0)
