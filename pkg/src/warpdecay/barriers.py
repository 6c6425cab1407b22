"""Growth-rate hypotheses, barrier functions and pointwise comparison.

A case is a hypothesis on the mean curvature H = Delta_g r of the level sets
(a lower or upper bound holding for large r), together with the barrier
that the hypothesis makes a super- or subsolution and the resulting
envelope for L^2 solutions of (-Delta - lam) u = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import expr as ex
from .expr import Expr
from .profiles import WarpingProfile, distance_mean_curvature
from .radial import RadialSolution, normalized_residual

__all__ = [
    "Rates", "rates", "rates_negative", "GrowthRateCase", "BoundTemplate", "VARIANTS",
    "make_case", "case_bound", "barrier_candidate", "hypothesis_profile", "check_hypothesis",
    "supersolution_check", "subsolution_check", "find_onset", "comparison_envelope",
    "CheckReport", "HypothesisViolation", "OnsetError", "DominationError", "case_table",
    "sign_change_roots", "CaseParameterError",
]

VARIANTS = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi", "thm1_2", "thm1_3")
POINTS_PER_DECADE = 4096
JOINT_COLLAR = 1e-6
SIGN_RTOL = 1e-12


class CaseParameterError(ValueError):
    pass


class HypothesisViolation(ValueError):
    def __init__(self, radius, msg):
        self.radius = radius
        super().__init__(msg)


class OnsetError(ArithmeticError):
    pass


class DominationError(ArithmeticError):
    def __init__(self, radius, msg):
        self.radius = radius
        super().__init__(msg)


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rates:
    c: float
    lam: float
    alpha: float
    alpha_minus: float


def rates(c: float, lam: float) -> Rates:
    """Roots of x^2 - c x + lam = 0, larger one first."""
    if lam < 0 or lam >= c * c / 4:
        raise ValueError(f"need 0 <= lambda < c^2/4, got c={c}, lambda={lam}")
    s = math.sqrt(c * c / 4 - lam)
    alpha = c / 2 + s
    # product form avoids cancellation in c/2 - s
    alpha_minus = lam / alpha if alpha != 0 else c / 2 - s
    return Rates(c, lam, alpha, alpha_minus)


def rates_negative(beta: float, lam: float) -> float:
    """alpha_tilde = beta/2 - sqrt(beta^2/4 - lam) for negative growth rate -beta."""
    if beta <= 0 or lam < 0 or lam >= beta * beta / 4:
        raise ValueError(f"need beta > 0 and 0 <= lambda < beta^2/4, got beta={beta}, lambda={lam}")
    return lam / (beta / 2 + math.sqrt(beta * beta / 4 - lam))


# ---------------------------------------------------------------------------
# cases
# ---------------------------------------------------------------------------

_REQUIRED = {
    "i": ("beta1",), "ii": ("beta2",), "iii": ("beta3", "eps"), "iv": ("beta4",),
    "v": ("beta5", "theta"), "vi": ("theta",), "vii": ("beta6", "theta", "eps"),
    "viii": ("theta", "eps"), "ix": ("beta7", "theta", "eps"), "x": ("theta", "eps"),
    "xi": ("beta8", "theta", "eps"), "thm1_2": ("delta", "C1", "eps"),
    "thm1_3": ("beta", "c1", "delta", "eps"),
}


@dataclass(frozen=True)
class GrowthRateCase:
    variant: str
    c: float
    lam: float
    params: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.variant, self.c, self.lam, tuple(sorted(self.params.items()))))

    def p(self, name):
        return self.params[name]

    @property
    def rates(self) -> Rates:
        return rates(self.c, self.lam)

    @property
    def alpha(self) -> float:
        if self.variant == "thm1_3":
            return rates_negative(self.p("beta"), self.lam)
        return self.rates.alpha

    @property
    def hypothesis(self):
        """(side, Expr): Delta_g r >= expr (side 'lower') or <= expr ('upper') for large r."""
        return _hypothesis(self)


def make_case(variant: str, c: float = 2.0, lam: float = 0.75, **params) -> GrowthRateCase:
    """Build and validate a case. ``eps``/``delta``/``theta`` are the small constants."""
    if variant not in VARIANTS:
        raise CaseParameterError(f"unknown variant {variant!r}")
    missing = [k for k in _REQUIRED[variant] if k not in params]
    if missing:
        raise CaseParameterError(f"variant {variant} needs parameters {missing}")
    extra = set(params) - set(_REQUIRED[variant])
    if extra:
        raise CaseParameterError(f"variant {variant} does not take {sorted(extra)}")
    params = {k: float(v) for k, v in params.items()}
    case = GrowthRateCase(variant, float(c), float(lam), params)
    _validate(case)
    return case


def _validate(case: GrowthRateCase):
    v, P = case.variant, case.params

    def need(cond, msg):
        if not cond:
            raise CaseParameterError(f"variant {v}: {msg}")

    if v == "thm1_3":
        need(P["beta"] > 0, "beta > 0")
        need(0 <= case.lam < P["beta"] ** 2 / 4, "0 <= lambda < beta^2/4")
        need(P["c1"] > 0, "c1 > 0")
        need(P["delta"] > 0, "delta > 0")
        need(0 < P["eps"] < P["delta"], "0 < eps < delta")
        return
    need(case.c > 0, "c > 0")
    need(0 <= case.lam < case.c ** 2 / 4, "0 <= lambda < c^2/4")
    R = case.rates
    if v == "i":
        need(R.alpha_minus < P["beta1"] < R.alpha, "c/2 - sqrt(c^2/4 - lambda) < beta1 < c/2 + sqrt(c^2/4 - lambda)")
    elif v == "ii":
        b = P["beta2"]
        need((0 <= b < R.alpha_minus) or b > R.alpha, "0 <= beta2 < alpha_minus or beta2 > alpha")
    elif v == "thm1_2":
        need(P["delta"] > 0 and P["C1"] > 0, "delta > 0 and C1 > 0")
        need(0 < P["eps"] < P["delta"], "0 < eps < delta")
    else:
        for k, val in P.items():
            if k.startswith("beta"):
                need(val > 0, f"{k} > 0")
        if "eps" in P:
            need(P["eps"] > 0, "eps > 0")
        if "theta" in P:
            th = P["theta"]
            if v == "vi":
                need(0 < th <= 1, "0 < theta <= 1")
            elif v in ("viii", "x"):
                need(th > 0, "theta > 0")
            else:
                need(0 < th < 1, "0 < theta < 1")


_r = ex.r
_L = ex.log(_r)


def _hypothesis(case: GrowthRateCase):
    v, P, c = case.variant, case.params, case.c
    C = ex.const
    if v == "thm1_3":
        return "upper", -C(P["beta"]) + C(P["c1"]) / (_r * ex.log(_r + 1.0) ** (1 + P["delta"]) + 1.0)
    if v == "thm1_2":
        return "upper", C(c) + C(P["C1"]) / (_r * ex.log(_r + 1.0) ** (1 + P["delta"]) + 1.0)
    if v in ("i", "ii"):
        return ("lower" if v == "i" else "limit"), C(c)
    a = case.rates.alpha
    g = 2 * a - c
    th, eps = P.get("theta"), P.get("eps")
    if v == "iii":
        return "lower", C(c) - C(P["beta3"]) / (_r * _L ** (1 + eps))
    if v == "iv":
        return "lower", C(c) - C(P["beta4"]) / (_r * _L)
    if v == "v":
        return "lower", C(c) - C(P["beta5"]) / (_r * _L ** th)
    if v == "vi":
        return "lower", C(c) - C(g * th / a) / _r
    if v == "vii":
        return "lower", C(c) - C((g * (1 - th) * P["beta6"] - eps) / a) / _r ** th
    if v == "viii":
        return "lower", C(c) + C((g * th + eps) / a) / (_r * _L)
    if v == "ix":
        return "lower", C(c) + C((g * (1 - th) * P["beta7"] + eps) / a) / (_r * _L ** th)
    if v == "x":
        return "lower", C(c) + C((g * th + eps) / a) / _r
    if v == "xi":
        return "lower", C(c) + C((g * (1 - th) * P["beta8"] + eps) / a) / _r ** th
    raise CaseParameterError(v)  # pragma: no cover


def _log_density_exterior(case: GrowthRateCase) -> Expr:
    """Closed-form antiderivative of a mean curvature meeting the hypothesis (equality where possible)."""
    v, P, c = case.variant, case.params, case.c
    C = ex.const
    if v == "thm1_3":
        # H = -beta + c1/(2 r (log r)^(1+delta)) stays below the stated bound for r >= 4
        return -C(P["beta"]) * _r - C(P["c1"] / (2 * P["delta"])) * _L ** (-P["delta"])
    if v == "thm1_2":
        return C(c) * _r - C(P["C1"] / (2 * P["delta"])) * _L ** (-P["delta"])
    if v in ("i", "ii"):
        return C(c) * _r
    a = case.rates.alpha
    g = 2 * a - c
    th, eps = P.get("theta"), P.get("eps")
    if v == "iii":
        return C(c) * _r + C(P["beta3"] / eps) * _L ** (-eps)
    if v == "iv":
        return C(c) * _r - C(P["beta4"]) * ex.log(_L)
    if v == "v":
        return C(c) * _r - C(P["beta5"] / (1 - th)) * _L ** (1 - th)
    if v == "vi":
        return C(c) * _r - C(g * th / a) * _L
    if v == "vii":
        return C(c) * _r - C((g * (1 - th) * P["beta6"] - eps) / (a * (1 - th))) * _r ** (1 - th)
    if v == "viii":
        return C(c) * _r + C((g * th + eps) / a) * ex.log(_L)
    if v == "ix":
        return C(c) * _r + C((g * (1 - th) * P["beta7"] + eps) / (a * (1 - th))) * _L ** (1 - th)
    if v == "x":
        return C(c) * _r + C((g * th + eps) / a) * _L
    if v == "xi":
        return C(c) * _r + C((g * (1 - th) * P["beta8"] + eps) / (a * (1 - th))) * _r ** (1 - th)
    raise CaseParameterError(v)  # pragma: no cover


def hypothesis_profile(case: GrowthRateCase, n: int = 3, r_switch: float = 4.0) -> WarpingProfile:
    """Pole-regular profile whose exterior mean curvature sits on the case's hypothesis boundary."""
    if r_switch <= 1.0:
        raise ValueError("r_switch must exceed 1 (log-type terms)")
    F = ex.exp(_log_density_exterior(case) / float(n - 1))
    a, b = 0.5 * r_switch, r_switch
    s = ex.step((ex.r - a) / (b - a))
    mid = (1.0 - s) * ex.r + s * F
    return WarpingProfile(n, [(0.0, a, ex.r), (a, b, mid), (b, math.inf, F)], "rotsym")


def check_hypothesis(profile: WarpingProfile, case: GrowthRateCase, span, points: int = 2000):
    """Raise :class:`HypothesisViolation` at the first radius in ``span`` where the case fails."""
    side, bound = case.hypothesis
    x = np.geomspace(span[0], span[1], points)
    h = distance_mean_curvature(profile, x)
    b = bound(x)
    tol = 1e-12 * np.maximum(np.abs(h), 1.0)
    if side == "lower":
        bad = h < b - tol
    elif side == "upper":
        bad = h > b + tol
    else:
        # limit hypothesis: checked as |H - c| decreasing to within 1e-6 at the far end
        bad = np.zeros_like(x, dtype=bool)
        if abs(h[-1] - case.c) > 1e-6:
            bad[-1] = True
    if np.any(bad):
        rb = float(x[np.argmax(bad)])
        raise HypothesisViolation(rb, f"variant {case.variant} hypothesis fails at r = {rb!r}")
    return True


# ---------------------------------------------------------------------------
# envelopes and barriers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundTemplate:
    """B(r) = constant * prefactor(r) * exp(-gamma r)  (exp(+gamma r) when ``growing``)."""

    direction: str
    gamma: float
    prefactor: Expr
    onset_radius: float = 2.0
    constant: float = 1.0
    growing: bool = False
    variant: str | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)
    log_constant: float | None = None

    def expr(self) -> Expr:
        g = self.gamma if self.growing else -self.gamma
        return ex.const(self.constant) * self.prefactor * ex.exp(ex.const(g) * ex.r)

    def log_value(self, r):
        g = self.gamma if self.growing else -self.gamma
        lc = self.log_constant if self.log_constant is not None else math.log(self.constant)
        return lc + ex.log_of(self.prefactor)(r) + g * np.asarray(r)

    def __call__(self, r):
        return np.exp(self.log_value(r))


def case_bound(case: GrowthRateCase) -> BoundTemplate:
    """Envelope shape of the case's conclusion (constant left at 1)."""
    v, P = case.variant, case.params
    C = ex.const
    one = ex.const(1.0)
    if v == "ii":
        raise CaseParameterError("variant ii supplies subsolutions only; no envelope is emitted")
    if v == "thm1_3":
        return BoundTemplate("upper", case.alpha, one, growing=True, variant=v)
    if v == "thm1_2":
        return BoundTemplate("lower", case.rates.alpha, one, variant=v)
    if v == "i":
        return BoundTemplate("upper", P["beta1"], one, variant=v)
    a, c = case.rates.alpha, case.c
    g = 2 * a - c
    th = P.get("theta")
    pre = {
        "iii": lambda: one,
        "iv": lambda: ex.log(_r + 2.0) ** (a * P["beta4"] / g),
        "v": lambda: ex.exp(C(a * P["beta5"] / (g * (1 - th))) * ex.log(_r + 1.0) ** (1 - th)),
        "vi": lambda: (_r + 1.0) ** th,
        "vii": lambda: ex.exp(C(P["beta6"]) * _r ** (1 - th)),
        "viii": lambda: ex.log(_r + 2.0) ** (-th),
        "ix": lambda: ex.exp(-C(P["beta7"]) * ex.log(_r + 1.0) ** (1 - th)),
        "x": lambda: _r ** (-th),
        "xi": lambda: ex.exp(-C(P["beta8"]) * _r ** (1 - th)),
    }[v]()
    return BoundTemplate("upper", a, pre, variant=v)


def barrier_candidate(case: GrowthRateCase) -> Expr:
    """The corrected barrier whose residual sign the hypothesis controls.

    Supersolutions for upper bounds; subsolutions for ``ii`` and ``thm1_2``.
    """
    v, P = case.variant, case.params
    C = ex.const
    if v == "thm1_3":
        return ex.exp(C(case.alpha) * _r - _L ** (-P["eps"]))
    if v == "thm1_2":
        return ex.exp(C(-case.rates.alpha) * _r + _L ** (-P["eps"]))
    if v == "i":
        return ex.exp(C(-P["beta1"]) * _r)
    if v == "ii":
        return ex.exp(C(-P["beta2"]) * _r)
    a, c = case.rates.alpha, case.c
    g = 2 * a - c
    th, eps = P.get("theta"), P.get("eps")
    lin = C(-a) * _r
    if v == "iii":
        d1 = a * P["beta3"] / (eps * g)
        return ex.exp(lin - C(d1) * _L ** (-eps))
    if v == "iv":
        return _L ** (a * P["beta4"] / g) * ex.exp(lin)
    if v == "v":
        return ex.exp(lin + C(a * P["beta5"] / (g * (1 - th))) * _L ** (1 - th))
    if v == "vi":
        return _r ** th * ex.exp(lin)
    if v == "vii":
        return ex.exp(lin + C(P["beta6"]) * _r ** (1 - th))
    if v == "viii":
        return _L ** (-th) * ex.exp(lin)
    if v == "ix":
        return ex.exp(lin - C(P["beta7"]) * _L ** (1 - th))
    if v == "x":
        return _r ** (-th) * ex.exp(lin)
    if v == "xi":
        return ex.exp(lin - C(P["beta8"]) * _r ** (1 - th))
    raise CaseParameterError(v)  # pragma: no cover


def barrier_kind(case: GrowthRateCase) -> str:
    return "sub" if case.variant in ("ii", "thm1_2") else "super"


def case_table() -> str:
    """Markdown reference table generated from the registry with sample parameters."""
    samples = {
        "i": dict(beta1=1.2), "ii": dict(beta2=1.8), "iii": dict(beta3=1.0, eps=0.5),
        "iv": dict(beta4=1.0), "v": dict(beta5=1.0, theta=0.5), "vi": dict(theta=0.5),
        "vii": dict(beta6=1.0, theta=0.5, eps=0.1), "viii": dict(theta=0.5, eps=0.1),
        "ix": dict(beta7=1.0, theta=0.5, eps=0.1), "x": dict(theta=0.5, eps=0.1),
        "xi": dict(beta8=1.0, theta=0.5, eps=0.1), "thm1_2": dict(delta=1.0, C1=1.0, eps=0.5),
        "thm1_3": dict(beta=2.0, c1=1.0, delta=1.0, eps=0.5),
    }
    rows = ["| variant | parameters | hypothesis on Delta r | barrier | bound |",
            "|---|---|---|---|---|"]
    for v in VARIANTS:
        case = make_case(v, 2.0, 0.75, **samples[v])
        side, h = case.hypothesis
        rel = {"lower": ">=", "upper": "<=", "limit": "->"}[side]
        try:
            b = case_bound(case)
            bound = f"{b.direction}: {b.expr()}"
        except CaseParameterError:
            bound = "(subsolution only)"
        params = ", ".join(f"{k}={val:g}" for k, val in case.params.items())
        kind = barrier_kind(case)
        rows.append(f"| {v} | c=2, lambda=0.75, {params} | {rel} {h} | {kind}: {barrier_candidate(case)} | {bound} |")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# residual sign checks
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    kind: str
    verdict: bool
    min_residual: float
    first_failure: float | None
    span: tuple
    points: int
    worst_scaled: float

    def __bool__(self):
        return self.verdict


def _log_grid(span, grid_points=None):
    r1, r2 = float(span[0]), float(span[1])
    if not 0 < r1 < r2:
        raise ValueError("check span must satisfy 0 < r1 < r2")
    if grid_points is None:
        grid_points = max(int(math.ceil(POINTS_PER_DECADE * math.log10(r2 / r1))), 64)
    return np.geomspace(r1, r2, int(grid_points))


def _exclude_joints(profile, x):
    keep = np.ones_like(x, dtype=bool)
    for j in profile.joints:
        keep &= np.abs(x - j) > JOINT_COLLAR
    return x[keep]


def _residual_check(profile, lam, w, span, grid_points, sign):
    x = _exclude_joints(profile, _log_grid(span, grid_points))
    A = ex.log_of(w)
    av = A(x)
    if np.any(np.isnan(av)):
        bad = float(x[np.argmax(np.isnan(av))])
        raise ValueError(f"barrier is not positive at r = {bad!r}")
    val, scale = normalized_residual(profile, lam, w, x, return_scale=True)
    s = sign * val
    fail = s < -SIGN_RTOL * scale
    first = float(x[np.argmax(fail)]) if np.any(fail) else None
    return CheckReport(
        "super" if sign > 0 else "sub", not bool(np.any(fail)), float(np.min(val) if sign > 0 else np.max(val)),
        first, (float(span[0]), float(span[1])), len(x), float(np.min(s / scale)),
    )


def supersolution_check(profile: WarpingProfile, lam: float, w: Expr, span, grid_points=None) -> CheckReport:
    """Pointwise (-Delta - lam) w >= 0 on a log grid; ``min_residual`` is of the residual divided by w."""
    return _residual_check(profile, lam, w, span, grid_points, +1)


def subsolution_check(profile: WarpingProfile, lam: float, w: Expr, span, grid_points=None) -> CheckReport:
    """Pointwise (-Delta - lam) w <= 0; ``min_residual`` holds the largest residual/w."""
    return _residual_check(profile, lam, w, span, grid_points, -1)


def find_onset(profile, lam, w, kind="super", r_start=2.0, r_end=1e4, r_limit=1e3):
    """Smallest grid radius after which the residual sign stays correct up to ``r_end``."""
    x = _exclude_joints(profile, _log_grid((r_start, r_end)))
    val, scale = normalized_residual(profile, lam, w, x, return_scale=True)
    s = val if kind == "super" else -val
    bad = np.nonzero(s < -SIGN_RTOL * scale)[0]
    if len(bad) == 0:
        return float(r_start)
    if bad[-1] + 1 >= len(x):
        raise OnsetError(f"residual sign is wrong at the end of the scan r = {r_end!r}")
    onset = float(x[bad[-1] + 1])
    if onset > r_limit:
        raise OnsetError(f"no uniform residual sign starting below r = {r_limit!r} (onset {onset!r})")
    return onset


def sign_change_roots(fn, grid, tol=1e-9):
    """Bisect every sign change of ``fn`` on ``grid`` down to width ``tol``; returns brackets."""
    vals = [fn(g) for g in grid]
    out = []
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if (fa > 0) == (fb > 0):
            continue
        while b - a > tol:
            m = 0.5 * (a + b)
            fm = fn(m)
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

def comparison_envelope(v: RadialSolution, w: Expr, r_anchor: float, profile=None, lam=None,
                        direction: str = "upper", r_max: float | None = None, gamma: float = 0.0,
                        growing: bool = False, rtol: float = 1e-9) -> BoundTemplate:
    """Certify |v| <= C w (or >= for ``direction='lower'``) on the grid beyond ``r_anchor``.

    C is fixed on the anchor sphere. With a profile and lam, the barrier's
    residual sign and the L^2 tail proxy are checked first.
    """
    lo, hi = v.span
    r_max = hi if r_max is None else min(float(r_max), hi)
    if not lo <= r_anchor < r_max:
        raise ValueError("anchor must lie inside the solution span")
    if profile is not None and lam is not None:
        check = supersolution_check if direction == "upper" else subsolution_check
        rep = check(profile, lam, w, (r_anchor, r_max))
        if not rep.verdict:
            raise DominationError(rep.first_failure, f"barrier fails its residual sign at r = {rep.first_failure!r}")
        tail = np.linspace(r_anchor + 0.5 * (r_max - r_anchor), r_max, 8)
        dens = 2 * v.log_abs(tail) + profile.log_density(tail)
        if not dens[-1] < dens[0]:
            raise DominationError(float(tail[-1]), "v^2 f^(n-1) does not decay on the tail")
    A = ex.log_of(w)
    logC = float(v.log_abs(np.array([r_anchor]))[0] - A(r_anchor))
    mask = (v.r >= r_anchor) & (v.r <= r_max)
    x = np.concatenate([[r_anchor], v.r[mask]])
    gap = v.log_abs(x) - (logC + A(x))
    slack = math.log1p(rtol)
    bad = gap > slack if direction == "upper" else gap < -slack
    if np.any(bad):
        rb = float(x[np.argmax(bad)])
        raise DominationError(rb, f"domination violated at r = {rb!r}")
    # prefactor w * exp(+-gamma r) so that B = C * prefactor * exp(-+gamma r) equals C w
    g = -gamma if growing else gamma
    pre = w * ex.exp(ex.const(g) * ex.r) if gamma else w
    diag = {"log_constant": logC, "max_log_gap": float(np.max(gap)), "min_log_gap": float(np.min(gap)),
            "points": int(len(x)), "r_max": r_max}
    return BoundTemplate(direction, gamma, pre, r_anchor, math.exp(logC), growing, diagnostics=diag,
                         log_constant=logC)


def with_onset(bound: BoundTemplate, onset: float) -> BoundTemplate:
    return replace(bound, onset_radius=float(onset))
