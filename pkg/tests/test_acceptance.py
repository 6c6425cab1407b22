"""Acceptance criteria, each at its stated tolerance.

One PASS/FAIL line per criterion is printed in the terminal summary.
Criteria 4 and 7 cannot be met by the constructions as stated; they run
unchanged and are marked as strict expected failures.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from warpdecay import barriers as br
from warpdecay import expr as ex
from warpdecay.models import build_prop12, build_prop13, build_remark61
from warpdecay.profiles import (distance_mean_curvature, ess_spectrum_bottom, euclidean,
                                exponential_end, mean_curvature)
from warpdecay.radial import (RadialSolution, decay_exponent_fit, integrate_radial, normalized_residual,
                              residual, wronskian_log)
from warpdecay.spectral import (count_eigenvalues_below, dirichlet_eigenvalue_annulus, fd_oracle,
                                ground_state_search, majorant_threshold, rayleigh_onset, rayleigh_test,
                                shooting_count, shooting_eigenvalues)

r = ex.r


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def test_prop12_ground_state():
    t0 = time.perf_counter()
    c = build_prop12(n=3, kappa=1.0, lambda0=0.75)
    lam, sol = ground_state_search(c.f, (0.05, 0.99), 40.0)
    elapsed = time.perf_counter() - t0
    x = np.linspace(c.r0, 36.0, 2000)
    ratio = np.exp(sol.log_abs(x) - sol.log_abs(np.array([c.r0]))[0] + 1.5 * (x - c.r0))
    shape_err = float(np.max(np.abs(ratio - 1.0)))
    far = np.linspace(c.r0, c.r0 + 100.0, 1000)
    h_err = float(np.max(np.abs(mean_curvature(c.f, far) - 2.0)))
    ok = (abs(lam - 0.75) <= 1e-6 and shape_err <= 1e-4 and h_err <= 1e-9
          and ess_spectrum_bottom(c.c) == 1.0 and elapsed < 10.0)
    record(1, ok, f"lambda0 err {abs(lam - 0.75):.2e}, shape err {shape_err:.2e}, "
                  f"H err {h_err:.2e}, ess {ess_spectrum_bottom(c.c)}, {elapsed:.2f}s")


def test_prop13_construction():
    t0 = time.perf_counter()
    c = build_prop13(c=2.0, lam=0.75)
    worst = 0.0
    for piece in c.phi.pieces:
        lo, hi = max(piece.lo, -20.0), min(piece.hi, 20.0)
        t = np.linspace(lo, hi, 2001)
        worst = max(worst, float(np.max(np.abs(residual(c.f, 0.75, piece.expr, t)))))
    right = np.linspace(c.R, c.R + 100.0, 1000)
    left = np.linspace(-100.0, 0.0, 1000)
    h_err = max(float(np.max(np.abs(distance_mean_curvature(c.f, right) + 2.0))),
                float(np.max(np.abs(distance_mean_curvature(c.f, left) - 2.0))))
    lam, sol = ground_state_search(c.f, (0.05, 0.99), 40.0, verify=False)
    grow = -decay_exponent_fit(sol, (4.0, 40.0)).gamma
    decay = decay_exponent_fit(sol.reflected(), (4.0, 40.0)).gamma
    elapsed = time.perf_counter() - t0
    ok = (worst <= 1e-8 and h_err <= 1e-9 and abs(grow - 0.5) <= 1e-3 and abs(decay - 1.5) <= 1e-3
          and elapsed < 10.0)
    record(2, ok, f"phi residual {worst:.2e}, H err {h_err:.2e}, exponents {grow:.6f}/{decay:.6f}, "
                  f"{elapsed:.2f}s")


def test_case_table():
    prof = exponential_end(ex.exp(r), 3, 2.0)  # Delta r = 2 beyond r = 2

    def sign_fn(beta):
        return float(normalized_residual(prof, 0.75, ex.exp(-beta * r), np.array([10.0]))[0])

    roots = br.sign_change_roots(sign_fn, np.linspace(0.0, 2.0, 41), tol=1e-9)
    brackets_ok = (len(roots) == 2 and all(hi - lo <= 1e-9 and lo <= b <= hi
                                           for (lo, hi), b in zip(roots, (0.5, 1.5))))
    w = ex.exp(-1.5 * r - 3.0 * ex.log(r) ** -0.5)
    case = br.make_case("iii", 2.0, 0.75, beta3=1.0, eps=0.5)
    same = abs(br.barrier_candidate(case)(50.0) - w(50.0)) <= 1e-15 * w(50.0)
    flat = br.supersolution_check(prof, 0.75, w, (1e2, 1e4))
    extremal = br.supersolution_check(br.hypothesis_profile(case), 0.75, w, (1e2, 1e4))
    ok = brackets_ok and same and flat.verdict and extremal.verdict
    record(3, ok, f"roots {[(float(a), float(b)) for a, b in roots]}, iii barrier "
                  f"super on Delta r = c: {flat.verdict}, on hypothesis boundary: {extremal.verdict}")


@pytest.mark.xfail(strict=True, reason="the (1+eps)/log r correction is 0.16-0.22 on [1e3, 1e4]")
def test_variant_iii_asymptotics():
    case = br.make_case("iii", 2.0, 0.75, beta3=1.0, eps=0.5)
    prof = br.hypothesis_profile(case)
    w = br.barrier_candidate(case)
    eps = 0.5
    d1 = case.alpha * 1.0 / (eps * (2 * case.alpha - case.c))
    x = np.geomspace(1e3, 1e4, 200)
    L = np.log(x)
    ratio = normalized_residual(prof, 0.75, w, x) / (eps * d1 * x ** -2 * L ** (-1 - eps))
    lo, hi = float(np.min(ratio)), float(np.max(ratio))
    record(4, 0.9 <= lo and hi <= 1.1, f"ratio range [{lo:.4f}, {hi:.4f}] (target [0.9, 1.1])")


def test_growing_end_domination():
    c = build_prop13()
    lam, sol = ground_state_search(c.f, (0.05, 0.99), 110.0, verify=False)
    lognorm = sol.log_l2_norm(c.f)
    unit = RadialSolution(sol.r, sol.u, sol.du, sol.log_scale - lognorm, sol.n, lam, sol.bc, sol.tol, c.f)
    anchor = c.R + 1.0
    bound = br.comparison_envelope(unit, ex.exp(0.5 * r), anchor, c.f, lam, r_max=100.0)
    pts = bound.diagnostics["points"]
    gap = bound.diagnostics["max_log_gap"]
    record(5, gap <= math.log1p(1e-9), f"{pts} grid points on [R+1, 100], max log(|u|/C e^(r/2)) = {gap:.2e}")


def test_rayleigh_at_desk_scale():
    t0 = time.perf_counter()
    prof = build_remark61(c=2.0, delta=1.0)
    kt = majorant_threshold(1.0)
    arith = (kt == 2 * math.exp(24) and 3 - math.log(kt * (1 + 1e-12) / 2) / 8 < 0
             and 3 - math.log(kt * (1 - 1e-12) / 2) / 8 > 0)
    R = 50.0
    k_star, sweep = rayleigh_onset(prof, 2.0, R, delta=1.0)
    lam1 = dirichlet_eigenvalue_annulus(prof, (R, 2 * k_star * R), 1, tol=1e-10, hi=1.0)
    below = count_eigenvalues_below(prof, 1.0, 2 * k_star * R, r_min=R)
    elapsed = time.perf_counter() - t0
    ok = arith and k_star == 2.0 ** 18 and k_star < kt and lam1 < 1.0 and below >= 1 and elapsed < 60.0
    record(6, ok, f"majorant root 2e^24 = {kt:.6e}, onset k* = 2^{int(math.log2(k_star))}, "
                  f"lambda1(E(R, 2k*R)) = 1 - {1 - lam1:.3e}, {elapsed:.2f}s")


@pytest.mark.xfail(strict=True, reason="zeros are spaced by a factor exp(2 pi) ~ 535 in r for delta = 1")
def test_counts_increase():
    prof = build_remark61(c=2.0, delta=1.0)
    counts = [count_eigenvalues_below(prof, 1.0 - 1e-9, R) for R in (1e2, 1e3, 1e4)]
    record(7, counts[0] < counts[1] < counts[2], f"counts at R_max = 1e2, 1e3, 1e4: {counts}")


def _random_configs(rng, k=20):
    out = []
    for i in range(k):
        kind = i % 4
        if kind == 0:
            prof = euclidean(int(rng.integers(2, 5)))
        elif kind == 1:
            prof = build_remark61(c=float(rng.uniform(0.5, 3.0)), delta=float(rng.uniform(0.2, 5.0)))
        elif kind == 2:
            prof = exponential_end(ex.exp(float(rng.uniform(0.2, 1.5)) * r + 0.2 * ex.sin(r)), 3,
                                   float(rng.uniform(1.0, 2.5)))
        else:
            case = br.make_case("iii", 2.0, 0.75, beta3=float(rng.uniform(0.5, 2.0)), eps=0.5)
            prof = br.hypothesis_profile(case, n=int(rng.integers(2, 5)))
        R = float(rng.uniform(0.3, 2.0))
        S = R + float(rng.uniform(1.0, 4.0))
        out.append((prof, (R, S)))
    return out


def test_oracle_equivalence():
    rng = np.random.default_rng(20261015)
    worst, mismatches = 0.0, 0
    for prof, span in _random_configs(rng):
        sh = np.array(shooting_eigenvalues(prof, span, 3))
        fd = fd_oracle(prof, span, count=3, mesh_size=512)
        worst = max(worst, float(np.max(np.abs(sh - fd))))
        for lam in (0.5 * sh[0], 0.5 * (sh[0] + sh[1]), 0.5 * (sh[1] + sh[2]), 1.5 * sh[2]):
            if count_eigenvalues_below(prof, lam, span[1], r_min=span[0]) != shooting_count(prof, lam - 1e-9, span):
                mismatches += 1
    record(8, worst <= 1e-6 and mismatches == 0,
           f"20 configurations, max |shooting - FD| = {worst:.2e}, count mismatches = {mismatches}")


def test_property_suites():
    rng = np.random.default_rng(9)
    # Vieta
    vieta = 0.0
    for _ in range(1000):
        c = float(rng.uniform(0.01, 50.0))
        lam = float(rng.uniform(0.0, 0.999999)) * c * c / 4
        R = br.rates(c, lam)
        vieta = max(vieta, abs(R.alpha + R.alpha_minus - c) / c, abs(R.alpha * R.alpha_minus - lam) / max(lam, 1e-300))
    # structural derivative against central differences
    exprs = [ex.exp(2.0 * r) * ex.sin(r), ex.log(1.0 + r * r) / (r + 3.0), ex.power(r + 1.0, 0.7) * ex.cosh(r)]
    dmax = 0.0
    for e in exprs:
        for x in rng.uniform(0.2, 3.0, 20):
            num = (e(x + 1e-5) - e(x - 1e-5)) / 2e-5
            dmax = max(dmax, abs(e.diff()(x) - num) / max(1.0, abs(num)))
    # Abel: f^(n-1) W is constant
    prof = exponential_end(ex.exp(r + 0.3 * ex.sin(r)), 3, 2.0)
    s1 = integrate_radial(prof, 3.0, "value-slope", (1.0, 40.0), data=(1.0, 0.0), tol=1e-12)
    s2 = integrate_radial(prof, 3.0, "value-slope", (1.0, 40.0), data=(0.0, 1.0), tol=1e-12)
    sgn, lw = wronskian_log(prof, s1, s2, np.linspace(1.0, 40.0, 400))
    drift = float(np.max(np.abs(np.expm1(lw - lw[0])))) if np.all(sgn == sgn[0]) else math.inf
    # domain monotonicity: enlarging the annulus lowers the first Dirichlet eigenvalue
    p61 = build_remark61()
    mono = all(dirichlet_eigenvalue_annulus(p61, (R, S + g), 1) < dirichlet_eigenvalue_annulus(p61, (R, S), 1)
               for R, S, g in zip(rng.uniform(0.5, 2.0, 5), rng.uniform(2.5, 5.0, 5), rng.uniform(0.05, 1.0, 5)))
    ok = vieta <= 1e-12 and dmax <= 1e-6 and drift <= 1e-6 and mono
    record(9, ok, f"Vieta {vieta:.1e}, derivative {dmax:.1e}, Abel drift {drift:.1e}, monotone {mono}")


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main([__file__, "-v"]))
