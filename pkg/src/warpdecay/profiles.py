"""Warping profiles: piecewise expressions for f in dr^2 + f(r)^2 g_N.

Two domain kinds are supported. ``rotsym`` lives on [0, inf) with a pole at
0 (so f(0) = 0, f'(0) = 1); ``line`` lives on the whole real line and
describes a warped product over a compact fiber.

Pieces are half-open intervals [a, b); a point sitting exactly on a joint is
evaluated with the piece to its right.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .expr import Expr, smooth_step

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = [
    "Piece", "Piecewise", "WarpingProfile", "ProfileError", "DomainError",
    "mean_curvature", "measure_density", "log_measure_density",
    "distance_mean_curvature", "ess_spectrum_bottom", "glue", "blend",
    "monotone_glue", "glue_monotone_window", "smooth_step", "load_profile",
    "dump_profile", "profile_from_toml", "profile_to_toml", "euclidean",
    "flat_line", "constant_rate_line", "exponential_end",
]

JOINT_RTOL = 1e-9


class ProfileError(ValueError):
    """Invalid profile data (ordering, positivity, joint mismatch)."""


class DomainError(ValueError):
    """Radius outside the open domain of a profile."""


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    expr: Expr


class Piecewise:
    """Ordered, non-overlapping pieces [lo, hi) each carrying an Expr."""

    def __init__(self, pieces):
        pieces = tuple(p if isinstance(p, Piece) else Piece(float(p[0]), float(p[1]), p[2])
                       for p in pieces)
        if not pieces:
            raise ProfileError("at least one piece is required")
        for p in pieces:
            if not p.lo < p.hi:
                raise ProfileError(f"empty piece [{p.lo}, {p.hi})")
        for p, q in zip(pieces, pieces[1:]):
            if p.hi != q.lo:
                raise ProfileError(f"pieces must abut: {p.hi} vs {q.lo}")
        self.pieces = pieces
        self.joints = tuple(p.hi for p in pieces[:-1])
        self.lo, self.hi = pieces[0].lo, pieces[-1].hi

    def index(self, x):
        """Piece index for scalar or array radii (right piece on joints)."""
        if isinstance(x, (float, int)) or np.ndim(x) == 0:
            return bisect_right(self.joints, float(x))
        return np.searchsorted(np.asarray(self.joints), x, side="right")

    def map(self, fn):
        return Piecewise([Piece(p.lo, p.hi, fn(p.expr)) for p in self.pieces])

    def __call__(self, x):
        return _eval_pieces([p.expr for p in self.pieces], self, x)

    def __len__(self):
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)


def _eval_pieces(exprs, pw: Piecewise, x):
    if isinstance(x, float) or np.ndim(x) == 0:
        x = float(x)
        return exprs[bisect_right(pw.joints, x)](x)
    x = np.asarray(x, dtype=float)
    idx = pw.index(x)
    out = np.empty_like(x)
    for k in np.unique(idx):
        m = idx == k
        out[m] = exprs[k](x[m])
    return out


class WarpingProfile:
    """A warping function f with its derived radial quantities.

    ``H`` below is the mean curvature (n-1) f'/f of the level sets in the
    profile coordinate, computed from the symbolic log of f so that profiles
    like exp(c r) stay usable far past floating overflow of f itself.
    """

    def __init__(self, n: int, pieces, kind: str = "rotsym"):
        if int(n) != n or n < 2:
            raise ProfileError("dimension n must be an integer >= 2")
        if kind not in ("rotsym", "line"):
            raise ProfileError(f"unknown domain kind {kind!r}")
        self.n = int(n)
        self.kind = kind
        self.pw = pieces if isinstance(pieces, Piecewise) else Piecewise(pieces)
        if kind == "rotsym" and self.pw.lo != 0.0:
            raise ProfileError("rotationally symmetric profiles start at the pole r = 0")
        if kind == "line" and self.pw.lo != -math.inf:
            raise ProfileError("line profiles must cover (-inf, ...)")
        if self.pw.hi != math.inf:
            raise ProfileError("profiles must extend to +inf")
        m = self.n - 1
        fs = [p.expr for p in self.pw]
        self._f = fs
        self._df = [e.diff() for e in fs]
        self._d2f = [e.diff() for e in self._df]
        self._logf = [ex.log_of(e) for e in fs]
        self._H = [ex.const(m) * e.diff() for e in self._logf]
        self._dH = [e.diff() for e in self._H]
        self._V = [h * h / 4.0 + dh / 2.0 for h, dh in zip(self._H, self._dH)]

    @property
    def pieces(self):
        return self.pw.pieces

    @property
    def joints(self):
        return self.pw.joints

    # raw piecewise evaluation (no domain checks) ---------------------------
    def f(self, r):
        return _eval_pieces(self._f, self.pw, r)

    def df(self, r):
        return _eval_pieces(self._df, self.pw, r)

    def d2f(self, r):
        return _eval_pieces(self._d2f, self.pw, r)

    def log_f(self, r):
        return _eval_pieces(self._logf, self.pw, r)

    def H(self, r):
        """(n-1) f'/f in the profile coordinate."""
        return _eval_pieces(self._H, self.pw, r)

    def dH(self, r):
        return _eval_pieces(self._dH, self.pw, r)

    def V(self, r):
        """Liouville potential H^2/4 + H'/2 of the radial operator."""
        return _eval_pieces(self._V, self.pw, r)

    def log_density(self, r):
        return (self.n - 1) * self.log_f(r)

    def H_expr(self, r: float) -> Expr:
        return self._H[self.pw.index(r)]

    def piece_exprs(self, r: float):
        k = self.pw.index(r)
        return self._f[k], self._H[k]

    # checks --------------------------------------------------------------
    def check_domain(self, r):
        ra = np.asarray(r, dtype=float)
        if not np.all(np.isfinite(ra)):
            raise DomainError("radius must be finite")
        if self.kind == "rotsym" and np.any(ra <= 0.0):
            raise DomainError(f"radius {float(np.min(ra))!r} is not in the open domain (0, inf)")

    def validate(self, samples: int = 200, span=None):
        """Check positivity, joint agreement and pole regularity; returns a dict of results."""
        out = {}
        lo = 1e-3 if self.kind == "rotsym" else -10.0
        hi = 10.0
        if self.joints:
            lo = min(lo, self.joints[0] - 1.0) if self.kind == "line" else lo
            hi = max(hi, self.joints[-1] + 1.0)
        if span is not None:
            lo, hi = span
        grid = np.linspace(lo, hi, samples)
        fv = self.f(grid)
        if not np.all(fv > 0):
            bad = grid[np.argmax(~(fv > 0))]
            raise ProfileError(f"f is not positive at r = {bad!r}")
        out["positive"] = True
        worst = 0.0
        for k, rj in enumerate(self.joints):
            for fam in (self._f, self._df):
                a, b = fam[k](rj), fam[k + 1](rj)
                rel = abs(a - b) / max(abs(a), abs(b), 1e-300)
                if abs(a - b) > 1e-300 and rel > JOINT_RTOL:
                    raise ProfileError(f"joint mismatch at r = {rj!r}: {a!r} vs {b!r}")
                worst = max(worst, rel if abs(a - b) > 1e-300 else 0.0)
        out["joint_max_rel"] = worst
        if self.kind == "rotsym":
            for rr in (1e-3, 1e-4):
                q = self.f(rr) / rr
                if abs(q - 1.0) > 1e-6:
                    raise ProfileError(f"f(r)/r = {q!r} at r = {rr}; pole is not smooth")
            out["pole_ok"] = True
        return out

    def __repr__(self):
        return f"WarpingProfile(n={self.n}, kind={self.kind!r}, pieces={len(self.pieces)})"


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

def _check_positive(profile, r):
    fv = profile.f(r)
    if np.any(np.asarray(fv) <= 0) or np.any(np.isnan(fv)):
        raise ProfileError("warping function is not positive at the requested radius")


def mean_curvature(profile: WarpingProfile, r):
    """(n-1) f'(r)/f(r), the Laplacian of the profile coordinate."""
    profile.check_domain(r)
    logf = np.asarray(profile.log_f(r))
    if np.any(np.isnan(logf)):
        raise ProfileError("warping function is not positive at the requested radius")
    return profile.H(r)


def distance_mean_curvature(profile: WarpingProfile, t):
    """Laplacian of the distance to the core {0} x N (line) or to the pole (rotsym).

    For line profiles the distance is |t|, so the sign flips on t <= 0
    (the core itself is reported with the left end's one-sided value).
    """
    h = mean_curvature(profile, t)
    if profile.kind == "line":
        return np.where(np.asarray(t) <= 0, -h, h) if np.ndim(t) else (-h if t <= 0 else h)
    return h


def measure_density(profile: WarpingProfile, r):
    """f(r)^(n-1)."""
    profile.check_domain(r)
    return np.exp(log_measure_density(profile, r))


def log_measure_density(profile: WarpingProfile, r):
    profile.check_domain(r)
    v = profile.log_density(r)
    if np.any(np.isnan(v)):
        raise ProfileError("warping function is not positive at the requested radius")
    return v


def ess_spectrum_bottom(c: float) -> float:
    return c * c / 4.0


# ---------------------------------------------------------------------------
# gluing
# ---------------------------------------------------------------------------

def blend(left: Expr, right: Expr, a: float, b: float) -> Expr:
    """(1 - psi(x)) left + psi(x) right with x = (r - a)/(b - a)."""
    if not a < b:
        raise ValueError(f"glue window needs a < b, got [{a}, {b}]")
    s = ex.step((ex.r - a) / (b - a))
    return (1.0 - s) * left + s * right


def glue(left: Expr, right: Expr, a: float, b: float) -> Piecewise:
    """Smoothly switch from ``left`` to ``right`` across [a, b]."""
    return Piecewise([(-math.inf, a, left), (a, b, blend(left, right, a, b)), (b, math.inf, right)])


def _strictly_monotone(e: Expr, a: float, b: float, sign: int, points: int) -> bool:
    grid = np.linspace(a, b, points)
    d = e.diff()(grid)
    return bool(np.all(sign * d > 0))


def glue_monotone_window(left, right, a, b, sign=-1, anchor="left", points=10_000,
                         max_halvings=20):
    """Shrink [a, b] geometrically until the blend is strictly monotone.

    ``sign`` is the required sign of the derivative. ``anchor`` keeps that
    endpoint fixed. Returns ``(a, b, blended_expr)``.
    """
    lo, hi = float(a), float(b)
    for _ in range(max_halvings + 1):
        e = blend(left, right, lo, hi)
        if _strictly_monotone(e, lo, hi, sign, points):
            return lo, hi, e
        w = 0.5 * (hi - lo)
        if anchor == "left":
            hi = lo + w
        else:
            lo = hi - w
    raise ProfileError(f"no monotone glue window found in [{a}, {b}] after {max_halvings} halvings")


def monotone_glue(left: Expr, right: Expr, a: float, b: float, q: float = 0.25,
                  max_halvings=20) -> Expr:
    """Glue two strictly monotone functions by blending their derivatives.

    Works when a plain blend cannot be monotone (e.g. the right function lies
    below the left one although both increase). The derivative is

        D = (1 - psi(x/q)) L' + psi((x - 1 + q)/q) R' + K B(x)/w,

    where B is a unit-mass bump inside the window and K is chosen so that the
    integral of D over [a, b] equals R(b) - L(a). The result is
    L(a) + integral of D, which coincides with L near a and with R near b.
    """
    w = b - a
    gap = right(b) - left(a)
    if gap == 0.0:
        raise ProfileError("monotone glue needs R(b) != L(a)")
    sgn = 1.0 if gap > 0 else -1.0
    x = (ex.r - a) / w
    dl, dr = left.diff(), right.diff()
    for _ in range(max_halvings + 1):
        fade = (1.0 - ex.step(x / q)) * dl + ex.step((x - (1.0 - q)) / q) * dr
        carried = ex.integral(fade, a, b)(b)
        K = gap - carried
        if K * sgn > 0:
            bump = ex.step((x - q / 2.0) / (1.0 - q), 1) / ((1.0 - q) * w)
            D = fade + K * bump
            g = ex.integral(D, a, b)
            e = left(a) + g
            if _strictly_monotone(e, a, b, int(sgn), 10_000):
                return e
        q *= 0.5
    raise ProfileError(f"derivative glue failed on [{a}, {b}]")


# ---------------------------------------------------------------------------
# simple reference profiles
# ---------------------------------------------------------------------------

def euclidean(n: int) -> WarpingProfile:
    return WarpingProfile(n, [(0.0, math.inf, ex.r)], "rotsym")


def flat_line(n: int = 2) -> WarpingProfile:
    """Density identically 1 on the line."""
    return WarpingProfile(n, [(-math.inf, math.inf, ex.const(1.0))], "line")


def constant_rate_line(c: float, n: int = 2) -> WarpingProfile:
    """f = exp(c t/(n-1)) on the line, so the profile mean curvature is c everywhere."""
    return WarpingProfile(n, [(-math.inf, math.inf, ex.exp(ex.const(c / (n - 1)) * ex.r))], "line")


def exponential_end(exterior: Expr, n: int, r_switch: float = 2.0) -> WarpingProfile:
    """Rotationally symmetric profile equal to ``exterior`` on [r_switch, inf) and r near the pole."""
    a, b = 0.5 * r_switch, r_switch
    return WarpingProfile(n, [(0.0, a, ex.r), (a, b, blend(ex.r, exterior, a, b)),
                              (b, math.inf, exterior)], "rotsym")


# ---------------------------------------------------------------------------
# profile files
# ---------------------------------------------------------------------------

def _toml_float(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def profile_to_toml(profile: WarpingProfile) -> str:
    lines = [
        f'kind = "{profile.kind}"',
        f"n = {profile.n}",
        "joints = [" + ", ".join(_toml_float(j) for j in profile.joints) + "]",
    ]
    for p in profile.pieces:
        lines += ["", "[[pieces]]", f"from = {_toml_float(p.lo)}", f"to = {_toml_float(p.hi)}",
                  f'expr = "{p.expr}"']
    return "\n".join(lines) + "\n"


def profile_from_toml(text: str) -> WarpingProfile:
    data = tomllib.loads(text)
    unknown = set(data) - {"kind", "n", "joints", "pieces"}
    if unknown:
        raise ProfileError(f"unknown keys in profile definition: {sorted(unknown)}")
    pieces = []
    for p in data.get("pieces", []):
        extra = set(p) - {"from", "to", "expr"}
        if extra:
            raise ProfileError(f"unknown piece keys: {sorted(extra)}")
        pieces.append((float(p["from"]), float(p["to"]), ex.parse(p["expr"])))
    prof = WarpingProfile(int(data["n"]), pieces, data.get("kind", "rotsym"))
    joints = tuple(float(j) for j in data.get("joints", prof.joints))
    if joints != prof.joints:
        raise ProfileError("declared joints do not match the piece boundaries")
    return prof


def dump_profile(profile: WarpingProfile, path) -> None:
    from .io import atomic_write_text
    atomic_write_text(path, profile_to_toml(profile))


def load_profile(path) -> WarpingProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_toml(fh.read())
