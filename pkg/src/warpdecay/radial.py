"""Radial eigenvalue equation u'' + H(r) u' + lam u = 0 on a warping profile."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from . import expr as ex
from .expr import Expr
from .io import fmt, write_csv
from .ode import integrate_linear
from .profiles import Piece, WarpingProfile
from .quadrature import adaptive_simpson

POLE_START = 1e-6
BCS = ("regular-pole", "value-slope", "robin-decay")


class FitError(ValueError):
    pass


@dataclass
class RadialSolution:
    """Sampled solution. True values are ``exp(log_scale) * u`` (same for du)."""

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    log_scale: np.ndarray
    n: int
    lam: float
    bc: str
    tol: float
    profile: WarpingProfile | None = field(default=None, repr=False)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        self.log_scale = np.broadcast_to(np.asarray(self.log_scale, dtype=float), self.r.shape).copy()
        if self.r.ndim != 1 or len(self.r) < 2:
            raise ValueError("a solution needs at least two samples")
        if np.any(np.diff(self.r) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.du))):
            raise ValueError("solution samples must be finite")
        self._d2u = None

    @classmethod
    def from_samples(cls, r, u, du, n=2, lam=0.0, bc="value-slope", tol=0.0):
        return cls(np.asarray(r, float), np.asarray(u, float), np.asarray(du, float),
                   np.zeros(len(r)), n, lam, bc, tol)

    @property
    def span(self):
        return float(self.r[0]), float(self.r[-1])

    def values(self):
        """True (u, du) on the grid; may under- or overflow for extreme scales."""
        s = np.exp(self.log_scale)
        return self.u * s, self.du * s

    def d2u(self):
        """Scaled u'' at the grid, from the equation when a profile is attached."""
        if self._d2u is None:
            if self.profile is not None:
                self._d2u = -self.profile.H(self.r) * self.du - self.lam * self.u
            else:
                self._d2u = np.full_like(self.u, np.nan)
        return self._d2u

    def _segment(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.r[0] - 1e-12 * abs(self.r[0])) or np.any(x > self.r[-1] * (1 + 1e-15) + 1e-300):
            raise ValueError(f"evaluation outside the solution span {self.span}")
        k = np.clip(np.searchsorted(self.r, x, side="right") - 1, 0, len(self.r) - 2)
        return x, k

    def interpolate(self, x):
        """Return (log_scale, u, du) at x with u, du relative to exp(log_scale).

        Quintic Hermite when the equation supplies u'', cubic otherwise.
        """
        x, k = self._segment(x)
        r0, r1 = self.r[k], self.r[k + 1]
        h = r1 - r0
        t = (x - r0) / h
        rel = np.exp(self.log_scale[k + 1] - self.log_scale[k])
        y0, y1 = self.u[k], self.u[k + 1] * rel
        p0, p1 = self.du[k] * h, self.du[k + 1] * rel * h
        d2 = self.d2u()
        if np.all(np.isfinite(d2)):
            a0, a1 = d2[k] * h * h, d2[k + 1] * rel * h * h
            u, du = _quintic(t, y0, p0, a0, y1, p1, a1)
        else:
            u, du = _cubic(t, y0, p0, y1, p1)
        return self.log_scale[k], u, du / h

    def __call__(self, x):
        ls, u, _ = self.interpolate(x)
        return u * np.exp(ls)

    def derivative(self, x):
        ls, _, du = self.interpolate(x)
        return du * np.exp(ls)

    def log_abs(self, x):
        ls, u, _ = self.interpolate(x)
        with np.errstate(divide="ignore"):
            return ls + np.log(np.abs(u))

    def log_abs_grid(self):
        with np.errstate(divide="ignore"):
            return self.log_scale + np.log(np.abs(self.u))

    def reflected(self) -> "RadialSolution":
        """The same samples in the coordinate s = -r (for the left end of a line profile)."""
        out = RadialSolution(-self.r[::-1], self.u[::-1], -self.du[::-1], self.log_scale[::-1],
                             self.n, self.lam, self.bc, self.tol, None)
        return out

    def log_l2_norm(self, profile=None, samples: int = 20001) -> float:
        """log of (int u^2 f^(n-1) dr)^(1/2) over the solution span (trapezoid, log-shifted)."""
        prof = profile if profile is not None else self.profile
        if prof is None:
            raise ValueError("a profile is needed for the weighted norm")
        x = np.linspace(*self.span, samples)
        lg = 2.0 * self.log_abs(x) + prof.log_density(x)
        m = float(np.max(lg))
        return 0.5 * (m + math.log(trapezoid(np.exp(lg - m), x)))

    def to_csv(self, path):
        header = [f"n={self.n}", f"lambda={fmt(self.lam)}", f"bc={self.bc}", f"tol={fmt(self.tol)}"]
        if np.any(self.log_scale != 0):
            cols = ["r", "u", "du", "log_scale"]
            rows = zip(self.r, self.u, self.du, self.log_scale)
        else:
            cols = ["r", "u", "du"]
            rows = zip(self.r, self.u, self.du)
        write_csv(path, header, cols, rows)


def _cubic(t, y0, p0, y1, p1):
    t2, t3 = t * t, t * t * t
    u = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * p0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * p1
    du = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * p0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * p1
    return u, du


def _quintic(t, y0, p0, a0, y1, p1, a1):
    t2 = t * t
    t3, t4, t5 = t2 * t, t2 * t2, t2 * t2 * t
    h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5
    h1 = t - 6 * t3 + 8 * t4 - 3 * t5
    h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
    h3 = 0.5 * (t3 - 2 * t4 + t5)
    h4 = -4 * t3 + 7 * t4 - 3 * t5
    h5 = 10 * t3 - 15 * t4 + 6 * t5
    d0 = -30 * t2 + 60 * t3 - 30 * t4
    d1 = 1 - 18 * t2 + 32 * t3 - 15 * t4
    d2 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4)
    d3 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4)
    d4 = -12 * t2 + 28 * t3 - 15 * t4
    d5 = 30 * t2 - 60 * t3 + 30 * t4
    u = h0 * y0 + h1 * p0 + h2 * a0 + h3 * a1 + h4 * p1 + h5 * y1
    du = d0 * y0 + d1 * p0 + d2 * a0 + d3 * a1 + d4 * p1 + d5 * y1
    return u, du


def robin_slope(h: float, lam: float, end: str = "right") -> float:
    """Log-derivative u'/u of the decaying mode of x^2 + h x + lam = 0 at a far end."""
    disc = h * h - 4.0 * lam
    if disc < 0:
        raise ValueError(f"no real decay rate: H^2 - 4 lam = {disc!r} < 0")
    if end == "right":
        return 0.5 * (-h - math.sqrt(disc))
    return 0.5 * (-h + math.sqrt(disc))


def integrate_radial(profile: WarpingProfile, lam: float, bc: str, span, tol: float = 1e-10,
                     data=(1.0, 0.0), amplitude: float = 1.0, max_steps: int = 10_000_000,
                     stop_on_sign_change: bool = False) -> RadialSolution:
    """Integrate the radial equation across ``span``.

    ``bc`` selects the starting data: ``regular-pole`` (pole series, amplitude
    u(0)), ``value-slope`` (``data`` = (u, u') at span[0]) or ``robin-decay``
    (u = amplitude, u'/u = decaying far-field rate at span[0]; span[0] may be
    the right end, in which case the integration runs inward).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if bc not in BCS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    a, b = float(span[0]), float(span[1])
    H = profile.H
    if bc == "regular-pole":
        if profile.kind != "rotsym":
            raise ValueError("regular-pole data needs a rotationally symmetric profile")
        if a > POLE_START or b <= POLE_START:
            raise ValueError("regular-pole integration runs outward from the pole")
        n = profile.n
        r0 = POLE_START
        u0 = amplitude * (1.0 - lam * r0 * r0 / (2 * n))
        du0 = -amplitude * lam * r0 / n
        a = r0
    elif bc == "value-slope":
        u0, du0 = float(data[0]), float(data[1])
    else:
        end = "right" if a > b else "left"
        u0 = amplitude
        du0 = amplitude * robin_slope(float(H(a)), lam, end)
    if profile.kind == "rotsym" and min(a, b) <= 0:
        raise ValueError("span must lie in the open half-line")
    res = integrate_linear(H, lam, a, b, u0, du0, tol=tol, max_steps=max_steps,
                           stop_on_sign_change=stop_on_sign_change)
    rr, uu, vv, ll = res.r, res.u, res.du, res.log_scale
    if a > b:
        rr, uu, vv, ll = rr[::-1], uu[::-1], vv[::-1], ll[::-1]
    sol = RadialSolution(rr, uu, vv, ll, profile.n, float(lam), bc, float(tol), profile)
    sol.stopped = res.stopped
    return sol


def residual(profile: WarpingProfile, lam: float, w: Expr, r):
    """(-Delta - lam) w = -(w'' + H w') - lam w at r."""
    profile.check_domain(r)
    d1, d2 = w.diff(), w.diff(2)
    return -(d2(r) + profile.H(r) * d1(r)) - lam * w(r)


def normalized_residual(profile: WarpingProfile, lam: float, w: Expr, r, return_scale=False):
    """Residual divided by w, computed from A = log w to avoid under/overflow.

    Returns -A'' - A'^2 - H A' - lam (and optionally the magnitude scale
    |A'' + A'^2| + |H A'| + |lam| used for sign tolerances).
    """
    profile.check_domain(r)
    A = ex.log_of(w)
    dA, d2A = A.diff(), A.diff(2)
    a1, a2, h = dA(r), d2A(r), profile.H(r)
    val = -a2 - a1 * a1 - h * a1 - lam
    if return_scale:
        return val, np.abs(a2 + a1 * a1) + np.abs(h * a1) + abs(lam)
    return val


@dataclass
class DecayFit:
    gamma: float
    log_prefactor_power: float
    r_window: tuple
    residual_norm: float
    intercept: float = 0.0


def fit_log_samples(r, logu, window):
    """Least squares logu ~ a - gamma r + p log log r."""
    r = np.asarray(r, float)
    A = np.column_stack([np.ones_like(r), -r, np.log(np.log(r))])
    coef, res, *_ = np.linalg.lstsq(A, logu, rcond=None)
    resid = float(np.linalg.norm(A @ coef - logu))
    return DecayFit(float(coef[1]), float(coef[2]), tuple(window), resid, float(coef[0]))


def decay_exponent_fit(solution: RadialSolution, window=None, samples: int = 400) -> DecayFit:
    """Fit log|u| = a - gamma r + p log log r on log-spaced samples in ``window``."""
    lo, hi = solution.span
    if window is None:
        window = (hi / 10.0, hi)
    a, b = float(window[0]), float(window[1])
    if a <= 1.0:
        raise FitError("fit window must lie in r > 1 (log log r basis)")
    if a < lo or b > hi * (1 + 1e-12):
        raise FitError(f"window {window} outside solution span {solution.span}")
    b = min(b, hi)
    inside = (solution.r >= a) & (solution.r <= b)
    if np.count_nonzero(inside) < 10:
        raise FitError("window holds fewer than 10 grid points")
    idx = np.nonzero(inside)[0]
    seg = solution.u[max(idx[0] - 1, 0): idx[-1] + 2]
    if np.any(seg == 0) or np.any(np.sign(seg) != np.sign(seg[0])):
        raise FitError("solution changes sign inside the fit window")
    x = np.geomspace(a, b, samples)
    return fit_log_samples(x, solution.log_abs(x), (a, b))


def profile_from_radial_solution(u: Expr, lam: float, n: int, base, upper: float,
                                 check_points: int = 200) -> Piece:
    """Warping piece on [r0, upper] for which ``u`` solves the radial equation.

    f(r) = f0 exp(-int_{r0}^r (u'' + lam u)/((n-1) u')).
    """
    r0, f0 = float(base[0]), float(base[1])
    if not upper > r0:
        raise ValueError("upper end must exceed the base radius")
    if f0 <= 0:
        raise ValueError("base value f0 must be positive")
    du, d2u = u.diff(), u.diff(2)
    grid = np.linspace(r0, upper, 4 * check_points + 1)
    dv = du(grid)
    if np.any(dv == 0) or np.any(np.sign(dv) != np.sign(dv[0])) or not np.all(np.isfinite(dv)):
        raise ValueError("u' vanishes on the interval; inversion is singular")
    g = (d2u + lam * u) / (float(n - 1) * du)
    f = ex.const(f0) * ex.exp(-ex.integral(g, r0, upper))
    piece = Piece(r0, upper, f)
    # by construction H = -(u'' + lam u)/u', so the residual vanishes
    H = float(n - 1) * ex.log_of(f).diff()
    x = np.linspace(r0, upper, check_points)
    res = d2u(x) + H(x) * du(x) + lam * u(x)
    scale = np.abs(d2u(x)) + np.abs(H(x) * du(x)) + abs(lam * u(x))
    worst = float(np.max(np.abs(res) / np.maximum(scale, 1e-300)))
    if worst > 1e-8:
        raise ArithmeticError(f"inverted profile residual {worst:.3g} exceeds 1e-8")
    return piece


def integral_decay_profile(profile: WarpingProfile, solution: RadialSolution, R: float,
                           rtol: float = 1e-8) -> float:
    """int_R^{R+1} u^2 f^{n-1} dr."""
    lo, hi = solution.span
    if R < lo or R + 1 > hi * (1 + 1e-15):
        raise ValueError(f"solution span {solution.span} does not cover [{R}, {R + 1}]")
    if np.all(solution.u == 0):
        return 0.0

    def g(x):
        la = solution.log_abs(np.array([x]))[0]
        if la == -math.inf:
            return 0.0
        return math.exp(2 * la + profile.log_density(x))

    val, _ = adaptive_simpson(g, R, min(R + 1.0, hi), rtol=rtol)
    return val


def wronskian_log(profile, s1: RadialSolution, s2: RadialSolution, x):
    """(sign, log|f^{n-1} (u1 u2' - u2 u1')|) at x."""
    l1, u1, d1 = s1.interpolate(x)
    l2, u2, d2 = s2.interpolate(x)
    w = u1 * d2 - u2 * d1
    with np.errstate(divide="ignore"):
        return np.sign(w), l1 + l2 + np.log(np.abs(w)) + profile.log_density(x)


def self_consistency(solution: RadialSolution, max_checks: int = 2000) -> float:
    """Largest discrepancy between stored steps and a two-half-step re-integration.

    Each interval [r_k, r_{k+1}] is re-integrated from the stored state with
    the step forced to half its length; the gap in (u, u') relative to
    max(|u|, 1) is returned (it should stay below 10 tol).
    """
    prof = solution.profile
    if prof is None:
        raise ValueError("self-consistency needs the profile")
    k_all = np.arange(len(solution.r) - 1)
    if len(k_all) > max_checks:
        k_all = np.unique(np.linspace(0, len(solution.r) - 2, max_checks).astype(int))
    worst = 0.0
    for k in k_all:
        r0, r1 = solution.r[k], solution.r[k + 1]
        rel = math.exp(solution.log_scale[k + 1] - solution.log_scale[k])
        u, du = solution.u[k], solution.du[k]
        # two fixed half steps; huge tol disables rejection
        res = integrate_linear(prof.H, solution.lam, r0, r1, u, du, tol=1e300,
                               h0=0.5 * (r1 - r0) * (1 + 1e-12), record=False)
        gap = max(abs(res.u[-1] * math.exp(res.log_scale[-1]) - solution.u[k + 1] * rel),
                  abs(res.du[-1] * math.exp(res.log_scale[-1]) - solution.du[k + 1] * rel))
        worst = max(worst, gap / max(abs(u), abs(du), 1.0))
    return worst
