import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpdecay import barriers as br
from warpdecay import expr as ex
from warpdecay.profiles import exponential_end
from warpdecay.radial import integrate_radial, normalized_residual

r = ex.r
SAMPLE_PARAMS = {
    "i": dict(beta1=1.2), "ii": dict(beta2=1.8), "iii": dict(beta3=1.0, eps=0.5),
    "iv": dict(beta4=1.0), "v": dict(beta5=1.0, theta=0.5), "vi": dict(theta=0.5),
    "vii": dict(beta6=1.0, theta=0.5, eps=0.1), "viii": dict(theta=0.5, eps=0.1),
    "ix": dict(beta7=1.0, theta=0.5, eps=0.1), "x": dict(theta=0.5, eps=0.1),
    "xi": dict(beta8=1.0, theta=0.5, eps=0.1), "thm1_2": dict(delta=1.0, C1=1.0, eps=0.5),
    "thm1_3": dict(beta=2.0, c1=1.0, delta=1.0, eps=0.5),
}


@given(c=st.floats(0.01, 50.0), t=st.floats(0.0, 0.999999))
@settings(max_examples=1000, deadline=None)
def test_vieta(c, t):
    lam = t * c * c / 4
    R = br.rates(c, lam)
    assert R.alpha + R.alpha_minus == pytest.approx(c, rel=1e-12, abs=1e-12)
    assert R.alpha * R.alpha_minus == pytest.approx(lam, rel=1e-12, abs=1e-300)


def test_rates_reject_outside_range():
    with pytest.raises(ValueError):
        br.rates(2.0, 1.0)
    with pytest.raises(ValueError):
        br.rates_negative(2.0, 1.5)
    assert br.rates_negative(2.0, 0.75) == pytest.approx(0.5)


def test_case_validation():
    with pytest.raises(br.CaseParameterError):
        br.make_case("i", beta1=1.6)
    with pytest.raises(br.CaseParameterError):
        br.make_case("iii", beta3=1.0)
    with pytest.raises(br.CaseParameterError):
        br.make_case("iv", beta4=1.0, theta=0.2)
    with pytest.raises(br.CaseParameterError):
        br.make_case("xii")
    with pytest.raises(br.CaseParameterError):
        br.case_bound(br.make_case("ii", beta2=1.8))


def test_case_table_lists_every_variant():
    table = br.case_table()
    for v in br.VARIANTS:
        assert f"| {v} " in table


@pytest.mark.parametrize("variant", list(SAMPLE_PARAMS))
def test_barriers_have_the_right_sign_on_their_hypothesis_profile(variant):
    case = br.make_case(variant, **SAMPLE_PARAMS[variant])
    prof = br.hypothesis_profile(case)
    br.check_hypothesis(prof, case, (10.0, 1e4))
    w = br.barrier_candidate(case)
    if variant == "ii":
        # subsolution exp(-beta2 r) for beta2 outside [alpha_-, alpha]
        rep = br.subsolution_check(prof, case.lam, w, (10.0, 1e4))
    elif br.barrier_kind(case) == "super":
        rep = br.supersolution_check(prof, case.lam, w, (1e2, 1e4))
    else:
        rep = br.subsolution_check(prof, case.lam, w, (1e2, 1e4))
    assert rep.verdict, rep


def test_hypothesis_violation_reports_radius():
    case = br.make_case("x", theta=0.5, eps=0.1)
    flat = exponential_end(ex.exp(r), 3, 2.0)
    with pytest.raises(br.HypothesisViolation) as info:
        br.check_hypothesis(flat, case, (5.0, 100.0))
    assert info.value.radius == pytest.approx(5.0)


def test_exponential_residual_roots():
    prof = exponential_end(ex.exp(r), 3, 2.0)
    g = lambda b: float(normalized_residual(prof, 0.75, ex.exp(-b * r), np.array([10.0]))[0])  # noqa: E731
    roots = br.sign_change_roots(g, np.linspace(0.0, 2.0, 41))
    assert len(roots) == 2
    for (lo, hi), root in zip(roots, (0.5, 1.5)):
        assert hi - lo <= 1e-9
        assert lo <= root <= hi


@pytest.mark.parametrize("r0", [1e3, 1e4])
def test_variant_iii_residual_matches_expansion(r0):
    # independent closed form of NR / (eps d1 r^-2 L^(-1-eps)) on the extremal profile
    case = br.make_case("iii", beta3=1.0, eps=0.5)
    prof = br.hypothesis_profile(case)
    w = br.barrier_candidate(case)
    d1 = case.alpha * 1.0 / (0.5 * (2 * case.alpha - 2.0))
    L = math.log(r0)
    lead = 0.5 * d1 * r0 ** -2 * L ** -1.5
    expect = {1e3: 1.1896071995246163, 1e4: 1.1449726490909198}[r0]
    got = float(normalized_residual(prof, 0.75, w, np.array([r0]))[0]) / lead
    assert got == pytest.approx(expect, rel=1e-6)


@given(t=st.floats(0.05, 0.75), beta3=st.floats(0.1, 3.0), eps=st.floats(0.1, 1.0))
@settings(max_examples=25, deadline=None)
def test_variant_iii_is_supersolution_beyond_onset(t, beta3, eps):
    lam = t  # c = 2: lam <= 0.75 c^2/4
    case = br.make_case("iii", 2.0, lam, beta3=beta3, eps=eps)
    prof = br.hypothesis_profile(case)
    w = br.barrier_candidate(case)
    onset = br.find_onset(prof, lam, w, "super")
    assert onset <= 1e3
    assert br.supersolution_check(prof, lam, w, (max(onset, 10.0), 1e4)).verdict


def test_comparison_envelope_upper_and_lower():
    prof = exponential_end(ex.exp(r), 3, 2.0)
    sol = integrate_radial(prof, 0.75, "robin-decay", (60.0, 3.0))
    up = br.comparison_envelope(sol, ex.exp(-1.2 * r), 5.0, prof, 0.75, r_max=60.0)
    assert up.direction == "upper"
    x = np.linspace(5.0, 60.0, 50)
    assert np.all(sol.log_abs(x) <= up.log_value(x) + 1e-9)
    lo = br.comparison_envelope(sol, ex.exp(-1.8 * r), 5.0, direction="lower", r_max=60.0)
    assert np.all(sol.log_abs(x) >= lo.log_value(x) - 1e-9)
    with pytest.raises(br.DominationError):
        br.comparison_envelope(sol, ex.exp(-1.8 * r), 5.0, r_max=60.0)


def test_onset_error_when_never_settles():
    prof = exponential_end(ex.exp(r), 3, 2.0)
    with pytest.raises(br.OnsetError):
        br.find_onset(prof, 0.75, ex.exp(-1.7 * r), "super")
