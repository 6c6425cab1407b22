"""Explicit example manifolds with known ground states or growth rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import expr as ex
from .expr import Expr
from .profiles import (Piecewise, ProfileError, WarpingProfile, blend, distance_mean_curvature,
                       euclidean, glue_monotone_window, monotone_glue)
from .radial import integrate_radial, profile_from_radial_solution

__all__ = ["euclidean_ball_mode", "ball_mode_series", "build_prop12", "build_prop13",
           "build_remark61", "remark61_exterior", "Prop12Construction", "Prop13Construction"]


def ball_mode_series(n: int, lam: float, terms: int = 40) -> Expr:
    """Regular radial solution of v'' + (n-1)/t v' + lam v = 0 with v(0) = 1, as a polynomial."""
    nu = n / 2.0 - 1.0
    coeffs = [1.0]
    for k in range(1, terms):
        coeffs.append(coeffs[-1] * (-lam / 4.0) / (k * (nu + k)))
    s = ex.r * ex.r
    p = ex.const(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        p = c + s * p
    return p


def euclidean_ball_mode(n: int, lam: float):
    """(R0, v1): first Dirichlet radius of the ball with eigenvalue lam and its radial mode.

    R0 is found by shooting the radial ODE with lam = 1 and bisecting on the
    first sign change, then rescaled by 1/sqrt(lam).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    sol = integrate_radial(euclidean(n), 1.0, "regular-pole", (0.0, 10.0 + 2.0 * n),
                           tol=1e-13, stop_on_sign_change=True)
    if not sol.stopped:
        raise ArithmeticError("no zero found for the ball mode")
    a, b = sol.r[-2], sol.r[-1]
    z = brentq(lambda x: float(sol(np.array([x]))[0]), a, b, xtol=1e-15, rtol=1e-15)
    return z / math.sqrt(lam), ball_mode_series(n, lam)


@dataclass
class Prop12Construction:
    n: int
    kappa: float
    lambda0: float
    R0: float
    a0: float
    r0: float
    glue_window: tuple
    v1: Expr = field(repr=False)
    v0: Piecewise = field(repr=False)
    f: WarpingProfile = field(repr=False)
    C_r0: float = 0.0
    validation: dict = field(default_factory=dict)

    @property
    def c(self):
        return (self.n - 1) * math.sqrt(self.kappa)

    def manifest(self):
        return {
            "constructor": "prop12", "n": self.n, "kappa": self.kappa, "lambda0": self.lambda0,
            "R0": self.R0, "a0": self.a0, "r0": self.r0, "C_r0": self.C_r0,
            "glue_window": list(self.glue_window), "ess_bottom": self.c ** 2 / 4,
            "validation": self.validation,
        }


def build_prop12(n: int = 3, kappa: float = 1.0, lambda0: float = 0.75) -> Prop12Construction:
    """Rotationally symmetric manifold whose ground state is exp(-a0 r) outside a ball."""
    c = (n - 1) * math.sqrt(kappa)
    if kappa <= 0 or not 0 < lambda0 < c * c / 4:
        raise ValueError("need kappa > 0 and 0 < lambda0 < (n-1)^2 kappa / 4")
    a0 = c / 2 + math.sqrt(c * c / 4 - lambda0)
    R0, v1 = euclidean_ball_mode(n, lambda0)
    tail = ex.exp(ex.const(-a0) * ex.r)
    a, b, v_mid = glue_monotone_window(v1, tail, R0 / 2, R0, sign=-1, anchor="left")
    piece = profile_from_radial_solution(v_mid, lambda0, n, base=(a, a), upper=b)
    fb = piece.expr(b)
    sk = math.sqrt(kappa)
    f_tail = ex.const(fb) * ex.exp(ex.const(sk) * (ex.r - b))
    prof = WarpingProfile(n, [(0.0, a, ex.r), (a, b, piece.expr), (b, math.inf, f_tail)], "rotsym")
    v0 = Piecewise([(0.0, a, v1), (a, b, v_mid), (b, math.inf, tail)])

    validation = prof.validate(span=(1e-3, b + 5.0))
    grid = np.linspace(1e-6, b + 5.0, 10_000)
    dv = np.concatenate([v1.diff()(grid[grid < a]), v_mid.diff()(grid[(grid >= a) & (grid < b)]),
                         tail.diff()(grid[grid >= b])])
    if not (np.all(v0(grid) > 0) and np.all(dv < 0)):
        raise ProfileError("glued profile v0 is not positive and decreasing")
    validation["v0_monotone"] = True
    x = np.linspace(1e-3, a, 50)
    validation["pole_piece_identity"] = float(np.max(np.abs(prof.f(x) - x)))
    return Prop12Construction(n, kappa, lambda0, R0, a0, b, (a, b), v1, v0, prof,
                              C_r0=fb * math.exp(-sk * b), validation=validation)


@dataclass
class Prop13Construction:
    c: float
    lam: float
    n: int
    epsilon: float
    R1: float
    c1: float
    R: float
    alpha: float
    alpha_minus: float
    phi: Piecewise = field(repr=False)
    f: WarpingProfile = field(repr=False)
    validation: dict = field(default_factory=dict)

    @property
    def exponents(self):
        """(growing-side rate on [R, inf), decaying-side rate on (-inf, 0])."""
        return self.alpha_minus, self.alpha

    def manifest(self):
        return {
            "constructor": "prop13", "c": self.c, "lambda": self.lam, "n": self.n,
            "epsilon": self.epsilon, "R1": self.R1, "c1": self.c1, "R": self.R,
            "exponents": {"growing": self.alpha_minus, "decaying": self.alpha},
            "ess_bottom": self.c ** 2 / 4, "validation": self.validation,
        }


def _increasing_glue(left, right, a, b):
    for anchor in ("left", "right"):
        try:
            return glue_monotone_window(left, right, a, b, sign=+1, anchor=anchor)[2], "blend"
        except ProfileError:
            pass
    return monotone_glue(left, right, a, b), "derivative-blend"


def build_prop13(c: float = 2.0, lam: float = 0.75, epsilon: float | None = None, n: int = 2,
                 c1: float | None = None) -> Prop13Construction:
    """Warped product over a compact fiber with an explicit ground state of eigenvalue lam.

    The closed form exp(alpha_minus (t - R1)) holds on [R1, inf); the blend
    occupies (R1 - eps, R1), so the constant-curvature end starts at R = R1.
    """
    if c <= 0 or not 0 < lam < c * c / 4:
        raise ValueError("need c > 0 and 0 < lambda < c^2/4")
    sq = math.sqrt(c * c / 4 - lam)
    alpha, alpha_m = c / 2 + sq, c / 2 - sq
    k = math.sqrt(lam)
    R1 = math.pi / (2 * k)
    eps = R1 / 4 if epsilon is None else float(epsilon)
    if not 0 < eps < R1 - eps:
        raise ValueError("need 0 < epsilon < R1 - epsilon")
    u1 = ex.sin(ex.const(k) * ex.r)
    if c1 is None:
        c1 = u1(eps) / 2
    if not 0 < c1 < u1(eps):
        raise ValueError("c1 must lie in (0, u1(epsilon))")
    m = float(n - 1)

    left = ex.const(c1) * ex.exp(ex.const(alpha) * ex.r)
    right = ex.exp(ex.const(alpha_m) * (ex.r - R1))
    phi_a, how_a = _increasing_glue(left, u1, 0.0, eps)
    phi_b, how_b = _increasing_glue(u1, right, R1 - eps, R1)

    p1 = profile_from_radial_solution(phi_a, lam, n, base=(0.0, 1.0), upper=eps)
    f_eps = p1.expr(eps)
    p2 = profile_from_radial_solution(phi_b, lam, n, base=(R1 - eps, f_eps), upper=R1)
    f_R1 = p2.expr(R1)
    pieces = [
        (-math.inf, 0.0, ex.exp(ex.const(-c / m) * ex.r)),
        (0.0, eps, p1.expr),
        (eps, R1 - eps, ex.const(f_eps)),
        (R1 - eps, R1, p2.expr),
        (R1, math.inf, ex.const(f_R1) * ex.exp(ex.const(-c / m) * (ex.r - R1))),
    ]
    prof = WarpingProfile(n, pieces, "line")
    phi = Piecewise([(-math.inf, 0.0, left), (0.0, eps, phi_a), (eps, R1 - eps, u1),
                     (R1 - eps, R1, phi_b), (R1, math.inf, right)])

    validation = prof.validate(span=(-5.0, R1 + 5.0))
    grid = np.linspace(-5.0, R1 + 5.0, 10_000)
    dphi = Piecewise([(p.lo, p.hi, p.expr.diff()) for p in phi])(grid)
    if not np.all(dphi > 0):
        raise ProfileError("glued phi is not strictly increasing")
    validation["phi_increasing"] = True
    validation["glue_methods"] = [how_a, how_b]
    far = np.array([R1, R1 + 1.0, R1 + 10.0])
    validation["end_curvature_err"] = float(np.max(np.abs(distance_mean_curvature(prof, far) + c)))
    return Prop13Construction(c, lam, n, eps, R1, c1, R1, alpha, alpha_m, phi, prof, validation)


def remark61_exterior(n: int, c: float, delta: float) -> Expr:
    """f with f^(n-1) = exp(c r + (1 + delta)/(2 c r))."""
    m = float(n - 1)
    return ex.exp((ex.const(c) * ex.r + ex.const((1 + delta) / (2 * c)) / ex.r) / m)


def build_remark61(n: int = 3, c: float = 2.0, delta: float = 1.0,
                   r0_switch: float = 2.0) -> WarpingProfile:
    """Pole-regular profile equal to the sharpness example for r >= r0_switch."""
    if c == 0 or delta <= 0:
        raise ValueError("need c != 0 and delta > 0")
    if r0_switch <= 0:
        raise ValueError("r0_switch must be positive")
    F = remark61_exterior(n, c, delta)
    a, b = 0.5 * r0_switch, r0_switch
    prof = WarpingProfile(n, [(0.0, a, ex.r), (a, b, blend(ex.r, F, a, b)), (b, math.inf, F)],
                          "rotsym")
    prof.validate(span=(1e-3, b + 5.0))
    return prof
