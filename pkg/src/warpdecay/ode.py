"""Dormand-Prince 5(4) integrator for u'' + H(r) u' + lam u = 0.

The system is linear, so the state can be rescaled at will; when |(u, u')|
leaves [1e-100, 1e100] it is renormalized and the log of the factor is kept
in ``log_scale``. The true solution at sample k is ``exp(log_scale[k]) * u[k]``.
"""
import math

import numpy as np

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40

SAFETY = 0.9
PI_ALPHA = 0.7 / 5
PI_BETA = 0.4 / 5
BIG, SMALL = 1e100, 1e-100


class StepSizeError(ArithmeticError):
    """Raised when the step size underflows; ``radius`` records where."""

    def __init__(self, radius, msg=None):
        self.radius = radius
        super().__init__(msg or f"step size underflow at r = {radius!r}")


class ODEResult:
    __slots__ = ("r", "u", "du", "log_scale", "steps", "stopped")

    def __init__(self, r, u, du, log_scale, steps, stopped):
        self.r, self.u, self.du, self.log_scale = r, u, du, log_scale
        self.steps, self.stopped = steps, stopped


def integrate_linear(H, lam, r0, r1, u0, du0, tol=1e-10, max_steps=10_000_000,
                     h0=None, stop_on_sign_change=False, record=True):
    """Integrate from r0 to r1 (either direction) and return an :class:`ODEResult`.

    ``H`` is a scalar callable. With ``stop_on_sign_change`` the integration
    ends at the first accepted step where u changes sign.
    """
    lam = float(lam)
    r, u, v = float(r0), float(u0), float(du0)
    direction = 1.0 if r1 > r0 else -1.0
    span = abs(r1 - r0)
    if span == 0:
        raise ValueError("empty integration span")
    log_scale = 0.0
    nrm = max(abs(u), abs(v))
    if nrm == 0.0:
        raise ValueError("zero initial data gives the zero solution")
    if nrm > BIG or nrm < SMALL:
        u, v, log_scale = u / nrm, v / nrm, math.log(nrm)

    rs, us, vs, ls = [r], [u], [v], [log_scale]
    fu, fv = v, -H(r) * v - lam * u
    if h0 is None:
        d1 = max(abs(fu), abs(fv)) / max(abs(u), abs(v))
        h = 0.01 * span if d1 == 0 else min(0.01 * span, 0.01 / d1)
        h = max(h, 1e-12 * max(1.0, abs(r)))
    else:
        h = abs(h0)
    err_old = 1e-4
    steps = 0
    stopped = False
    hmin_rel = 1e-15
    while direction * (r1 - r) > 0:
        if steps >= max_steps:
            raise StepSizeError(r, f"maximum number of steps exceeded at r = {r!r}")
        last = h >= abs(r1 - r)
        if last:
            h = abs(r1 - r)
        hs = direction * h
        # stages
        k1u, k1v = fu, fv
        ru, rv = u + hs * A21 * k1u, v + hs * A21 * k1v
        k2u, k2v = rv, -H(r + C2 * hs) * rv - lam * ru
        ru = u + hs * (A31 * k1u + A32 * k2u)
        rv = v + hs * (A31 * k1v + A32 * k2v)
        k3u, k3v = rv, -H(r + C3 * hs) * rv - lam * ru
        ru = u + hs * (A41 * k1u + A42 * k2u + A43 * k3u)
        rv = v + hs * (A41 * k1v + A42 * k2v + A43 * k3v)
        k4u, k4v = rv, -H(r + C4 * hs) * rv - lam * ru
        ru = u + hs * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u)
        rv = v + hs * (A51 * k1v + A52 * k2v + A53 * k3v + A54 * k4v)
        k5u, k5v = rv, -H(r + C5 * hs) * rv - lam * ru
        ru = u + hs * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u)
        rv = v + hs * (A61 * k1v + A62 * k2v + A63 * k3v + A64 * k4v + A65 * k5v)
        k6u, k6v = rv, -H(r + hs) * rv - lam * ru
        un = u + hs * (B1 * k1u + B3 * k3u + B4 * k4u + B5 * k5u + B6 * k6u)
        vn = v + hs * (B1 * k1v + B3 * k3v + B4 * k4v + B5 * k5v + B6 * k6v)
        rn = r + hs
        k7u, k7v = vn, -H(rn) * vn - lam * un
        eu = hs * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
        ev = hs * (E1 * k1v + E3 * k3v + E4 * k4v + E5 * k5v + E6 * k6v + E7 * k7v)
        sc = tol * max(abs(u), abs(v), abs(un), abs(vn))
        err = max(abs(eu), abs(ev)) / sc if sc > 0 else math.inf
        if not math.isfinite(err):
            h *= 0.1
            last = False
            if h < hmin_rel * max(1.0, abs(r)):
                raise StepSizeError(r)
            continue
        if err <= 1.0:
            steps += 1
            if stop_on_sign_change and (un > 0) != (u > 0) and un != 0.0:
                stopped = True
            r, u, v = (r1 if last else rn), un, vn
            fu, fv = k7u, k7v
            nrm = max(abs(u), abs(v))
            if nrm > BIG or (0 < nrm < SMALL):
                u, v, fu, fv = u / nrm, v / nrm, fu / nrm, fv / nrm
                log_scale += math.log(nrm)
            if record or last or stopped:
                rs.append(r)
                us.append(u)
                vs.append(v)
                ls.append(log_scale)
            if stopped:
                break
            fac = SAFETY * max(err, 1e-10) ** -PI_ALPHA * err_old ** PI_BETA
            fac = min(5.0, max(0.2, fac))
            err_old = max(err, 1e-4)
            h *= fac
        else:
            h *= max(0.2, SAFETY * err ** -0.2)
            if h < hmin_rel * max(1.0, abs(r)):
                raise StepSizeError(r)
    return ODEResult(np.array(rs), np.array(us), np.array(vs), np.array(ls), steps, stopped)
