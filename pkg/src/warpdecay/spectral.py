"""Discrete spectra of the radial operator -(u'' + H u') on a warping profile.

Three independent routes are provided:

* a Pruefer-angle sweep of the Liouville normal form y'' + (lam - V) y = 0,
  y = f^((n-1)/2) u, V = H^2/4 + H'/2, whose winding counts eigenvalues;
* direct shooting of u with the Dormand-Prince integrator, counting sign
  changes of u;
* a finite-difference discretization of the weighted quadratic form,
  solved by Sturm-sequence bisection (LAPACK ``stebz``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import brentq

from .io import write_json
from .ode import integrate_linear
from .profiles import WarpingProfile, ess_spectrum_bottom
from .radial import POLE_START, RadialSolution, integrate_radial, robin_slope

__all__ = [
    "prufer_angle", "count_eigenvalues_below", "dirichlet_eigenvalue_annulus",
    "shooting_eigenvalues", "shooting_count", "ground_state_search", "eigenvalues_below",
    "fd_oracle", "rayleigh_test", "rayleigh_form", "rayleigh_onset", "RayleighTest",
    "SpectralReport", "BracketError", "spectral_report",
]

PRUFER_START = 1e-4
NUDGE = 1e-9
LAMBDA_CAP = 1e6


class BracketError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Pruefer angle
# ---------------------------------------------------------------------------

def _weight(lam):
    return math.sqrt(lam) if lam > 1e-2 else 0.1


def prufer_angle(profile: WarpingProfile, lam: float, a: float, b: float, theta0: float = 0.0,
                 rtol: float = 1e-12, atol: float = 1e-14) -> float:
    """theta(b) for y = rho sin(theta), y' = S rho cos(theta) with constant S = sqrt(lam).

    Multiples of pi do not depend on S, so floor(theta / pi) counts zeros of
    y. LSODA handles the stiff stretches where lam < V.
    """
    V = profile.V
    S = _weight(lam)

    def rhs(r, th):
        s, c = math.sin(th[0]), math.cos(th[0])
        return [S * c * c + (lam - V(r)) / S * s * s]

    joints = [j for j in profile.joints if a < j < b]
    th = theta0
    knots = [a, *joints, b]
    for lo, hi in zip(knots, knots[1:]):
        sol = solve_ivp(rhs, (lo, hi), [th], method="LSODA", rtol=rtol, atol=atol)
        if not sol.success:
            raise ArithmeticError(f"Pruefer sweep failed: {sol.message}")
        th = float(sol.y[0, -1])
    return th


def _pole_angle(profile, lam, r0=PRUFER_START):
    n = profile.n
    u = 1.0 - lam * r0 * r0 / (2 * n)
    du = -lam * r0 / n
    return math.atan2(_weight(lam) * u, du + 0.5 * profile.H(r0) * u)


def count_eigenvalues_below(profile: WarpingProfile, threshold: float, R_max: float,
                            r_min: float | None = None) -> int:
    """Dirichlet eigenvalues below ``threshold - 1e-9`` on [pole or r_min, R_max]."""
    lam = threshold - NUDGE
    if profile.kind == "rotsym" and r_min is None:
        a = PRUFER_START
        if lam <= 0:
            return 0
        th0 = _pole_angle(profile, lam, a)
    else:
        a = 0.0 if r_min is None else float(r_min)
        th0 = 0.0
    if R_max <= a:
        raise ValueError("R_max must exceed the left end")
    th = prufer_angle(profile, lam, a, R_max, th0)
    return max(int(math.floor(th / math.pi)), 0)


def dirichlet_eigenvalue_annulus(profile: WarpingProfile, span, index: int = 1, tol: float = 1e-8,
                                 hi: float | None = None) -> float:
    """k-th Dirichlet eigenvalue on span = [R, S] by Pruefer shooting and bracketed root finding."""
    R, S = float(span[0]), float(span[1])
    if not R < S:
        raise ValueError("need R < S")
    if profile.kind == "rotsym" and R <= 0:
        raise ValueError("annulus must avoid the pole")
    if index < 1:
        raise ValueError("index counts from 1")
    target = index * math.pi

    def g(lam):
        return prufer_angle(profile, lam, R, S) - target

    lo = 0.0
    if hi is None:
        hi = 1.0
        while g(hi) <= 0:
            lo = hi
            hi *= 2.0
            if hi > LAMBDA_CAP:
                raise BracketError(f"no bracket below {LAMBDA_CAP:g}")
    elif g(hi) <= 0:
        raise BracketError(f"eigenvalue {index} is not below {hi!r}")
    if g(lo) > 0:
        raise BracketError("lower bracket end already above the target angle")
    return brentq(g, lo, hi, xtol=0.25 * tol, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# direct shooting
# ---------------------------------------------------------------------------

def _shoot(profile, lam, R, S, tol=1e-11):
    res = integrate_linear(profile.H, lam, R, S, 0.0, 1.0, tol=tol)
    u = res.u
    # interior zeros: sign changes after the starting sample u(R) = 0
    sgn = np.sign(u[1:])
    changes = int(np.count_nonzero(sgn[1:] * sgn[:-1] < 0))
    end = u[-1] / math.hypot(u[-1], res.du[-1])
    return changes, end


def shooting_count(profile, lam, span, tol=1e-11) -> int:
    """Number of zeros of the Dirichlet solution inside span (= eigenvalues below lam)."""
    n, end = _shoot(profile, lam, float(span[0]), float(span[1]), tol)
    return n


def shooting_eigenvalues(profile: WarpingProfile, span, count: int = 3, tol: float = 1e-10,
                         ode_tol: float = 1e-11):
    """Lowest ``count`` Dirichlet eigenvalues on span by zero counting and root finding on u(S)."""
    R, S = float(span[0]), float(span[1])
    out = []
    lo = 0.0
    for k in range(1, count + 1):
        # grow an upper bound with at least k interior zeros
        hi = max(1.0, 2.0 * lo)
        while shooting_count(profile, hi, span, ode_tol) < k:
            hi *= 2.0
            if hi > LAMBDA_CAP:
                raise BracketError(f"no bracket below {LAMBDA_CAP:g}")
        a = lo
        b = hi
        # bisect on the zero count until the bracket isolates the sign change of u(S)
        while True:
            m = 0.5 * (a + b)
            if shooting_count(profile, m, span, ode_tol) >= k:
                b = m
            else:
                a = m
            ea = _shoot(profile, a, R, S, ode_tol)
            eb = _shoot(profile, b, R, S, ode_tol)
            if ea[0] == k - 1 and eb[0] == k and ea[1] * eb[1] < 0:
                break
            if b - a < tol:
                break
        if b - a >= tol:
            lam = brentq(lambda x: _shoot(profile, x, R, S, ode_tol)[1], a, b, xtol=tol,
                         rtol=4 * np.finfo(float).eps)
        else:
            lam = 0.5 * (a + b)
        out.append(lam)
        lo = lam
    return out


# ---------------------------------------------------------------------------
# ground states on the full (truncated) manifold
# ---------------------------------------------------------------------------

def _match_point(profile, R_max):
    if profile.joints:
        return min(max(profile.joints) + 1.0, 0.5 * R_max)
    return 0.25 * R_max if profile.kind == "rotsym" else 0.0


def _outward(profile, lam, rm, R_max, tol):
    if profile.kind == "rotsym":
        return integrate_radial(profile, lam, "regular-pole", (0.0, rm), tol=tol)
    return integrate_radial(profile, lam, "robin-decay", (-R_max, rm), tol=tol)


def _inward(profile, lam, rm, R_max, tol):
    return integrate_radial(profile, lam, "robin-decay", (R_max, rm), tol=tol)


def _mismatch(profile, lam, rm, R_max, tol):
    o = _outward(profile, lam, rm, R_max, tol)
    i = _inward(profile, lam, rm, R_max, tol)
    uo, do = o.u[-1], o.du[-1]
    ui, di = i.u[0], i.du[0]
    return (uo * di - ui * do) / (math.hypot(uo, do) * math.hypot(ui, di)), o, i


def _splice(o: RadialSolution, i: RadialSolution, profile, lam, bc, tol):
    # rescale the inward branch to match the outward value at the splice point
    lo_o = o.log_scale[-1] + math.log(abs(o.u[-1]))
    lo_i = i.log_scale[0] + math.log(abs(i.u[0]))
    sign = math.copysign(1.0, o.u[-1]) * math.copysign(1.0, i.u[0])
    r = np.concatenate([o.r[:-1], i.r])
    u = np.concatenate([o.u[:-1], sign * i.u])
    du = np.concatenate([o.du[:-1], sign * i.du])
    ls = np.concatenate([o.log_scale[:-1], i.log_scale + (lo_o - lo_i)])
    return RadialSolution(r, u, du, ls, profile.n, lam, bc, tol, profile)


def eigenvalues_below(profile: WarpingProfile, lam_hi: float, R_max: float, lam_lo: float = 0.0,
                      tol: float = 1e-10, ode_tol: float = 1e-11, scan: int = 64):
    """All zeros of the splice mismatch in (lam_lo, lam_hi) with Robin truncation at R_max."""
    rm = _match_point(profile, R_max)
    lams = np.linspace(lam_lo, lam_hi, scan + 1)[1:-1] if lam_lo == 0.0 else np.linspace(lam_lo, lam_hi, scan)
    vals = [_mismatch(profile, x, rm, R_max, ode_tol)[0] for x in lams]
    roots = []
    for a, b, fa, fb in zip(lams, lams[1:], vals, vals[1:]):
        if fa == 0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(brentq(lambda x: _mismatch(profile, x, rm, R_max, ode_tol)[0], a, b,
                                xtol=tol, rtol=4 * np.finfo(float).eps))
    return roots


def ground_state_search(profile: WarpingProfile, lambda_bracket, R_max: float = 40.0,
                        tol: float = 1e-10, ode_tol: float = 1e-10, scan: int = 12,
                        verify: bool = True):
    """Lowest eigenvalue in the bracket and its positive eigenfunction.

    The outward branch starts at the pole (or at the left Robin end for line
    profiles), the inward branch at R_max with the decaying Robin slope; the
    normalized Wronskian at the splice point is driven to zero.
    """
    lo, hi = float(lambda_bracket[0]), float(lambda_bracket[1])
    if not lo < hi:
        raise ValueError("empty bracket")
    rm = _match_point(profile, R_max)
    lams = np.linspace(lo, hi, scan)
    f = lambda x: _mismatch(profile, x, rm, R_max, ode_tol)[0]  # noqa: E731
    prev = f(lams[0])
    root = None
    for a, b in zip(lams, lams[1:]):
        cur = f(b)
        if prev == 0:
            root = a
            break
        if prev * cur < 0:
            root = brentq(f, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
            break
        prev = cur
    if root is None:
        raise BracketError("no sign change of the mismatch in the bracket; no discrete ground state detected")
    _, o, i = _mismatch(profile, root, rm, R_max, ode_tol)
    sol = _splice(o, i, profile, root, "robin-decay", ode_tol)
    if not (np.all(sol.u > 0) or np.all(sol.u < 0)):
        raise ArithmeticError("eigenfunction changes sign; not a ground state")
    if sol.u[0] < 0:
        sol = RadialSolution(sol.r, -sol.u, -sol.du, sol.log_scale, sol.n, sol.lam, sol.bc, sol.tol, profile)
    sol.diagnostics = {"match_point": rm, "R_max": R_max}
    if verify:
        w = max(1e-6, 1e-3 * (hi - lo))
        lo2, hi2 = max(lo, root - w), min(hi, root + w)
        r2 = brentq(lambda x: _mismatch(profile, x, _match_point(profile, 2 * R_max), 2 * R_max, ode_tol)[0],
                    lo2, hi2, xtol=tol, rtol=4 * np.finfo(float).eps)
        sol.diagnostics["lambda_2Rmax"] = r2
        sol.diagnostics["doubling_change"] = abs(r2 - root)
    return root, sol


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

def _fd_eigs(profile, a, b, N, boundary, kappa_r, count):
    x = np.linspace(a, b, N + 1)
    h = (b - a) / N
    mid = 0.5 * (x[:-1] + x[1:])
    logw_nodes = profile.log_density(x)
    logw_mid = profile.log_density(mid)
    shift = max(np.max(logw_nodes), np.max(logw_mid))
    wn, wm = np.exp(logw_nodes - shift), np.exp(logw_mid - shift)
    if boundary == "dirichlet":
        idx = np.arange(1, N)
        K_d = (wm[:-1] + wm[1:]) / h
        K_o = -wm[1:-1] / h
        M = h * wn[idx]
    else:
        # Robin at the right end: u' = kappa_r u, natural boundary term -w kappa u^2
        idx = np.arange(1, N + 1)
        K_d = np.concatenate([(wm[:-1] + wm[1:]) / h, [wm[-1] / h - wn[-1] * kappa_r]])
        K_o = -wm[1:] / h
        M = np.concatenate([h * wn[1:-1], [0.5 * h * wn[-1]]])
    s = 1.0 / np.sqrt(M)
    d = K_d * s * s
    e = K_o * s[:-1] * s[1:]
    m = min(count, len(d))
    return eigvalsh_tridiagonal(d, e, select="i", select_range=(0, m - 1), lapack_driver="stebz")


def fd_oracle(profile: WarpingProfile, span, boundary="dirichlet", mesh_size: int = 1024,
              count: int = 10, richardson: bool = True, kappa_r: float = 0.0):
    """Lowest eigenvalues of the weighted form int (u'^2 - lam u^2) f^(n-1) dr.

    Second-order midpoint stiffness with lumped mass; with ``richardson`` the
    meshes N and 2N are combined as (4 lam_2N - lam_N)/3.
    """
    if mesh_size < 64:
        raise ValueError("mesh_size must be at least 64")
    a, b = float(span[0]), float(span[1])
    if boundary not in ("dirichlet", "robin"):
        raise ValueError("boundary is 'dirichlet' or 'robin'")
    x = np.linspace(a, b, mesh_size + 1)
    jumps = np.abs(np.diff(profile.log_density(x)))
    if np.max(jumps) > 1.0:
        raise ValueError("mesh too coarse: density varies by more than a factor e per cell")
    e1 = _fd_eigs(profile, a, b, mesh_size, boundary, kappa_r, count)
    if not richardson:
        return e1
    e2 = _fd_eigs(profile, a, b, 2 * mesh_size, boundary, kappa_r, count)
    return (4.0 * e2 - e1) / 3.0


# ---------------------------------------------------------------------------
# Rayleigh quotient test
# ---------------------------------------------------------------------------

@dataclass
class RayleighTest:
    R: float
    k: float
    c: float
    delta: float | None
    r1: float
    value: float
    majorant: float | None
    h_support: tuple
    segments: tuple = field(default=(), repr=False)
    raw_value: float | None = None

    def chi(self, t):
        return _chi(np.asarray(t, dtype=float), self.R, self.k)


def _chi(t, R, k):
    out = np.zeros_like(t)
    up = (t >= R) & (t <= 2 * R)
    flat = (t > 2 * R) & (t < k * R)
    down = (t >= k * R) & (t <= 2 * k * R)
    out[up] = (t[up] - R) / R
    out[flat] = 1.0
    out[down] = (2 * k * R - t[down]) / (k * R)
    return out


def _quad(g, a, b, rtol):
    # H^2 - c^2 loses digits far out; quad stops cleanly at the roundoff floor
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(g, a, b, epsabs=1e-13, epsrel=rtol, limit=400)
    return val


def rayleigh_form(profile: WarpingProfile, c: float, pieces, rtol: float = 1e-10):
    """Quadratic form int {(h')^2 - (c^2/4) h^2} f^(n-1) dr for h = f^(-(n-1)/2) chi r^(1/2).

    ``pieces`` lists (a, b, chi, dchi) with chi linear on [a, b] (chi is
    continuous and vanishes at the ends of the support). After an
    integration by parts the integrand is

        r chi'^2 + chi^2 [1/(4r) + r H'/2 + r (H^2 - c^2)/4],

    which avoids the O(c r) cancellation of the expanded square. Long
    pieces are integrated in the variable log r.
    """
    H, dH = profile.H, profile.dH
    total = 0.0
    parts = []
    for a, b, chi, dchi in pieces:
        def g(t):
            x, dx = chi(t), dchi(t)
            h = H(t)
            return t * dx * dx + x * x * (0.25 / t + 0.5 * t * dH(t) + 0.25 * t * (h - c) * (h + c))

        if b / a > 4.0:
            val = _quad(lambda s: g(math.exp(s)) * math.exp(s), math.log(a), math.log(b), rtol)
        else:
            val = _quad(g, a, b, rtol)
        parts.append(val)
        total += val
    return total, tuple(parts)


def _raw_form(profile, c, pieces, rtol=1e-10):
    H = profile.H
    total = 0.0
    for a, b, chi, dchi in pieces:
        def g(t):
            x, dx = chi(t), dchi(t)
            return t * (dx + x * (0.5 / t - 0.5 * H(t))) ** 2 - 0.25 * c * c * x * x * t

        total += _quad(g, a, b, rtol)
    return total


def rayleigh_test(profile: WarpingProfile, n: int, c: float, R: float, k: float,
                  delta: float | None = None, r1: float = 0.0, raw_check: bool = False) -> RayleighTest:
    """Evaluate the test-function quadratic form on E(R, 2kR) with the piecewise-linear cutoff."""
    if n != profile.n:
        raise ValueError("dimension does not match the profile")
    if k <= 2:
        raise ValueError("k must exceed 2")
    if R < r1 or R <= 0:
        raise ValueError("R must be positive and at least r1")
    pieces = [
        (R, 2 * R, lambda t: (t - R) / R, lambda t: 1.0 / R),
        (2 * R, k * R, lambda t: 1.0, lambda t: 0.0),
        (k * R, 2 * k * R, lambda t: (2 * k * R - t) / (k * R), lambda t: -1.0 / (k * R)),
    ]
    value, parts = rayleigh_form(profile, c, pieces)
    maj = None if delta is None else 3.0 - (delta / 8.0) * math.log(k / 2.0)
    raw = _raw_form(profile, c, pieces) if raw_check else None
    return RayleighTest(R, k, c, delta, r1, value, maj, (R, 2 * k * R), parts, raw)


def majorant_threshold(delta: float) -> float:
    """k beyond which 3 - (delta/8) log(k/2) < 0, i.e. 2 exp(24/delta)."""
    return 2.0 * math.exp(24.0 / delta)


def rayleigh_onset(profile, c, R, delta=None, k0=4.0, k_max=2.0 ** 48):
    """Double k from k0 until the quadratic form turns negative; returns (k, [tests])."""
    k = float(k0)
    sweep = []
    while k <= k_max:
        t = rayleigh_test(profile, profile.n, c, R, k, delta)
        sweep.append(t)
        if t.value < 0:
            return k, sweep
        k *= 2.0
    raise BracketError(f"quadratic form stays nonnegative up to k = {k_max:g}")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class SpectralReport:
    ess_bottom: float
    discrete: list
    ground_state: RadialSolution | None
    truncation: dict
    method: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"ess_bottom": self.ess_bottom, "discrete": list(self.discrete),
                "truncation": self.truncation, "method": self.method, "diagnostics": self.diagnostics}

    def write(self, json_path, csv_path=None):
        write_json(json_path, self.to_dict())
        if csv_path is not None and self.ground_state is not None:
            self.ground_state.to_csv(csv_path)


def spectral_report(profile: WarpingProfile, c: float, R_max: float = 40.0, tol: float = 1e-10,
                    method: str = "shooting") -> SpectralReport:
    """Discrete eigenvalues below c^2/4 with Robin truncation at R_max (shooting) or FD oracle."""
    ess = ess_spectrum_bottom(c)
    top = ess * (1 - 1e-6)
    if method == "shooting":
        eigs = [x for x in eigenvalues_below(profile, top, R_max, tol=tol) if x < ess]
        gs = None
        if eigs:
            _, gs = ground_state_search(profile, (0.5 * eigs[0], min(top, eigs[0] + 0.5 * (top - eigs[0]))),
                                        R_max, tol=tol, verify=False)
        return SpectralReport(ess, eigs, gs, {"R_max": R_max, "boundary": "robin-decay"}, method)
    if method == "fd-oracle":
        if profile.kind != "rotsym":
            raise ValueError("the FD report covers rotationally symmetric profiles")
        kappa = robin_slope(float(profile.H(R_max)), top, "right")
        eigs = fd_oracle(profile, (POLE_START, R_max), "robin", mesh_size=4096, kappa_r=kappa)
        return SpectralReport(ess, [float(x) for x in eigs if x < ess], None,
                              {"R_max": R_max, "boundary": "robin", "kappa_r": kappa}, method)
    raise ValueError(f"unknown method {method!r}")
