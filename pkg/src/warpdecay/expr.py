"""Scalar expression trees in one variable ``r`` with exact structural differentiation.

Expressions are immutable and hashable. Build them from :data:`r`, :func:`const`
and the elementary functions below, or parse them from text::

    >>> f = parse("exp(2.0 * r) / r")
    >>> df = f.diff()
    >>> float(df(1.0))  # doctest: +ELLIPSIS
    7.389056...

Besides the elementary functions the tree supports two extension nodes:

``step(x, k)``
    k-th derivative of the smooth transition psi(x) = s(x)/(s(x)+s(1-x)),
    s(x) = exp(-1/x) for x > 0 and 0 otherwise.
``integral(g, a, b)``
    the running integral of g from ``a`` to ``r``, valid for ``a <= r <= b``.

Evaluation compiles the tree once into straight-line Python (``math`` for
scalars, ``numpy`` for arrays) with common subexpressions shared.
"""
from __future__ import annotations

import bisect
import math
import re
from functools import lru_cache

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Neg", "Pow", "Func",
    "Step", "Integral", "r", "const", "exp", "log", "sin", "cos", "sinh",
    "cosh", "sqrt", "step", "integral", "log_of", "parse", "ExprSyntaxError",
    "smooth_step",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt")


class ExprSyntaxError(ValueError):
    pass


class Expr:
    """Base node. Subclasses define ``_key`` (structural identity) and ``_diff``."""

    __slots__ = ("_hash", "_compiled")

    def __init__(self):
        self._hash = hash((type(self).__name__,) + self._key())
        self._compiled = None

    # structural identity ------------------------------------------------
    def _key(self) -> tuple:
        raise NotImplementedError

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._key() == other._key()

    def __setattr__(self, name, value):
        if name in ("_hash", "_compiled"):
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("Expr nodes are immutable")

    # algebra ------------------------------------------------------------
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        if isinstance(p, Expr):
            if not isinstance(p, Const):
                raise TypeError("exponent must be a constant")
            p = p.value
        return power(self, float(p))

    # calculus -----------------------------------------------------------
    def diff(self, order: int = 1) -> "Expr":
        e = self
        for _ in range(order):
            e = _diff_cached(e)
        return e

    # evaluation ---------------------------------------------------------
    def __call__(self, x):
        if self._compiled is None:
            self._compiled = _compile(self)
        scalar_fn, vector_fn = self._compiled
        if isinstance(x, (float, int)) or (np.ndim(x) == 0 and not isinstance(x, np.ndarray)):
            try:
                return scalar_fn(float(x))
            except (ValueError, OverflowError, ZeroDivisionError):
                with np.errstate(all="ignore"):
                    return float(vector_fn(np.float64(x)))
        with np.errstate(all="ignore"):
            out = vector_fn(np.asarray(x, dtype=float))
        return np.broadcast_to(out, np.shape(x)).astype(float)

    def is_const(self) -> bool:
        return isinstance(self, Const)

    def __str__(self):
        return _to_str(self)

    def __repr__(self):
        return f"Expr({_to_str(self)!r})"

    def nodes(self):
        """Iterate over all subexpressions (pre-order, may repeat)."""
        stack = [self]
        while stack:
            e = stack.pop()
            yield e
            stack.extend(reversed(e.children()))

    def children(self) -> tuple:
        return ()


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        object.__setattr__(self, "value", float(value))
        super().__init__()

    def _key(self):
        # -0.0 and 0.0 print differently; keep them distinct
        return (self.value, math.copysign(1.0, self.value))


class Var(Expr):
    __slots__ = ()

    def _key(self):
        return ()


class _Binary(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a: Expr, b: Expr):
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        super().__init__()

    def _key(self):
        return (self.a, self.b)

    def children(self):
        return (self.a, self.b)


class Add(_Binary):
    __slots__ = ()


class Sub(_Binary):
    __slots__ = ()


class Mul(_Binary):
    __slots__ = ()


class Div(_Binary):
    __slots__ = ()


class Neg(Expr):
    __slots__ = ("a",)

    def __init__(self, a: Expr):
        object.__setattr__(self, "a", a)
        super().__init__()

    def _key(self):
        return (self.a,)

    def children(self):
        return (self.a,)


class Pow(Expr):
    __slots__ = ("a", "p")

    def __init__(self, a: Expr, p: float):
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "p", float(p))
        super().__init__()

    def _key(self):
        return (self.a, self.p)

    def children(self):
        return (self.a,)


class Func(Expr):
    __slots__ = ("name", "a")

    def __init__(self, name: str, a: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "a", a)
        super().__init__()

    def _key(self):
        return (self.name, self.a)

    def children(self):
        return (self.a,)


class Step(Expr):
    """k-th derivative of the smooth transition psi evaluated at ``a``."""

    __slots__ = ("a", "order")

    def __init__(self, a: Expr, order: int = 0):
        if order < 0:
            raise ValueError("derivative order must be nonnegative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "order", int(order))
        super().__init__()

    def _key(self):
        return (self.a, self.order)

    def children(self):
        return (self.a,)


class Integral(Expr):
    """Running integral of ``integrand`` from ``lower`` to r, for lower <= r <= upper."""

    __slots__ = ("integrand", "lower", "upper")

    def __init__(self, integrand: Expr, lower: float, upper: float):
        lower, upper = float(lower), float(upper)
        if not (math.isfinite(lower) and math.isfinite(upper)) or upper <= lower:
            raise ValueError("integral bounds must be finite with lower < upper")
        object.__setattr__(self, "integrand", integrand)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        super().__init__()

    def _key(self):
        return (self.integrand, self.lower, self.upper)

    def children(self):
        return (self.integrand,)


# ---------------------------------------------------------------------------
# constructors with light constant folding (no other simplification)
# ---------------------------------------------------------------------------

r = Var()
ZERO = Const(0.0)
ONE = Const(1.0)


def const(v) -> Const:
    return Const(float(v))


def _wrap(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def power(a: Expr, p: float) -> Expr:
    p = float(p)
    if p == 0.0:
        return ONE
    if p == 1.0:
        return a
    if isinstance(a, Const):
        return Const(a.value ** p)
    return Pow(a, p)


def _func(name):
    def f(a) -> Expr:
        a = _wrap(a)
        if isinstance(a, Const):
            return Const(getattr(math, name)(a.value))
        return Func(name, a)

    f.__name__ = name
    return f


exp = _func("exp")
log = _func("log")
sin = _func("sin")
cos = _func("cos")
sinh = _func("sinh")
cosh = _func("cosh")
sqrt = _func("sqrt")


def step(a, order: int = 0) -> Expr:
    a = _wrap(a)
    if isinstance(a, Const):
        return Const(float(smooth_step(a.value, order)))
    return Step(a, order)


def integral(integrand, lower: float, upper: float) -> Expr:
    integrand = _wrap(integrand)
    return Integral(integrand, lower, upper)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _diff_cached(e: Expr) -> Expr:
    return _diff(e)


def _diff(e: Expr) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(e.a.diff(), e.b.diff())
    if isinstance(e, Sub):
        return sub(e.a.diff(), e.b.diff())
    if isinstance(e, Neg):
        return neg(e.a.diff())
    if isinstance(e, Mul):
        return add(mul(e.a.diff(), e.b), mul(e.a, e.b.diff()))
    if isinstance(e, Div):
        da, db = e.a.diff(), e.b.diff()
        return sub(div(da, e.b), div(mul(e.a, db), power(e.b, 2.0)))
    if isinstance(e, Pow):
        return mul(mul(Const(e.p), power(e.a, e.p - 1.0)), e.a.diff())
    if isinstance(e, Func):
        a, da = e.a, e.a.diff()
        inner = {
            "exp": lambda: e,
            "log": lambda: div(ONE, a),
            "sin": lambda: cos(a),
            "cos": lambda: neg(sin(a)),
            "sinh": lambda: cosh(a),
            "cosh": lambda: sinh(a),
            "sqrt": lambda: div(Const(0.5), e),
        }[e.name]()
        if e.name == "log":
            return div(da, a)
        return mul(inner, da)
    if isinstance(e, Step):
        return mul(step(e.a, e.order + 1), e.a.diff())
    if isinstance(e, Integral):
        return e.integrand
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def log_of(e: Expr) -> Expr:
    """Symbolic log of a positive expression.

    Splits products, quotients and powers of factors whose positivity is
    structural (exponentials, positive constants, real powers) so that
    quantities like exp(2r) can be handled far past float overflow.
    Falls back to ``log(e)``.
    """
    if isinstance(e, Func) and e.name == "exp":
        return e.a
    if isinstance(e, Const) and e.value > 0:
        return Const(math.log(e.value))
    if isinstance(e, Func) and e.name == "sinh":
        # log sinh a = a + log((1 - exp(-2a))/2), finite for large a > 0
        return add(e.a, log(mul(Const(0.5), sub(Const(1.0), exp(mul(Const(-2.0), e.a))))))
    if isinstance(e, Func) and e.name == "sqrt" and _positive(e.a):
        return mul(Const(0.5), log_of(e.a))
    if isinstance(e, Pow) and (_positive(e.a) or not float(e.p).is_integer()):
        return mul(Const(e.p), log_of(e.a))
    if isinstance(e, Mul) and _positive(e.a) and _positive(e.b):
        return add(log_of(e.a), log_of(e.b))
    if isinstance(e, Div) and _positive(e.a) and _positive(e.b):
        return sub(log_of(e.a), log_of(e.b))
    return log(e)


def _positive(e: Expr) -> bool:
    if isinstance(e, Const):
        return e.value > 0
    if isinstance(e, Func):
        if e.name in ("exp", "cosh"):
            return True
        if e.name == "sqrt":
            return _positive(e.a)
    if isinstance(e, Pow):
        return _positive(e.a) or not float(e.p).is_integer() or float(e.p) % 2 == 0
    if isinstance(e, (Mul, Div)):
        return _positive(e.a) and _positive(e.b)
    return False


# ---------------------------------------------------------------------------
# smooth step and its derivatives (truncated Taylor arithmetic)
# ---------------------------------------------------------------------------

# below this argument exp(-1/x) underflows relative to any representable result
_STEP_CUT = 1.0 / 700.0


def _series_exp(a):
    out = [math.exp(a[0])] if not isinstance(a[0], np.ndarray) else [np.exp(a[0])]
    for k in range(1, len(a)):
        out.append(sum(j * a[j] * out[k - j] for j in range(1, k + 1)) / k)
    return out


def _series_recip(a):
    out = [1.0 / a[0]]
    for k in range(1, len(a)):
        out.append(-sum(a[j] * out[k - j] for j in range(1, k + 1)) / a[0])
    return out


def _step_interior(x, order):
    """Taylor coefficients of psi at interior points; x scalar or array in the cut range."""
    K = order + 1
    # z(x) = 1/x - 1/(1-x); psi = 1/(1+e^z)
    z = [(-1.0) ** j / x ** (j + 1) - 1.0 / (1.0 - x) ** (j + 1) for j in range(K)]
    if isinstance(x, np.ndarray):
        pos = z[0] > 0
        sgn = np.where(pos, -1.0, 1.0)
        e = _series_exp([sgn * zj for zj in z])  # exp(-|z|) series
        denom = _series_recip([1.0 + e[0]] + e[1:])
        num_pos = _series_mul(e, denom)
        coeffs = [np.where(pos, num_pos[k], denom[k]) for k in range(K)]
    else:
        if z[0] > 0:
            e = _series_exp([-zj for zj in z])
            coeffs = _series_mul(e, _series_recip([1.0 + e[0]] + e[1:]))
        else:
            e = _series_exp(z)
            coeffs = _series_recip([1.0 + e[0]] + e[1:])
    return coeffs[order] * math.factorial(order)


def _series_mul(a, b):
    return [sum(a[j] * b[k - j] for j in range(k + 1)) for k in range(len(a))]


def smooth_step(x, order: int = 0):
    """psi^(order)(x) for scalar or array x; psi = 0 on x <= 0 and 1 on x >= 1."""
    if isinstance(x, (float, int)) or (np.ndim(x) == 0 and not isinstance(x, np.ndarray)):
        x = float(x)
        if x <= _STEP_CUT:
            return 0.0
        if x >= 1.0 - _STEP_CUT:
            return 1.0 if order == 0 else 0.0
        if order <= 1:
            z = 1.0 / x - 1.0 / (1.0 - x)
            p = 1.0 / (1.0 + math.exp(z)) if z < 0 else math.exp(-z) / (1.0 + math.exp(-z))
            if order == 0:
                return p
            return p * (1.0 - p) * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)))
        return float(_step_interior(x, order))
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if order == 0:
        out[x >= 1.0 - _STEP_CUT] = 1.0
    mid = (x > _STEP_CUT) & (x < 1.0 - _STEP_CUT)
    if np.any(mid):
        out[mid] = _step_interior(x[mid], order)
    return out


# ---------------------------------------------------------------------------
# running integrals: Gauss-Legendre panels with a cumulative table
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
L = np.polynomial.legendre
# column j projects Gauss-point samples onto P_j: c_j = (2j+1)/2 sum w_i g_i P_j(x_i)
_LEG_PROJ = np.stack([L.legval(_GL_X, np.eye(16)[j]) * (2 * j + 1) / 2 for j in range(16)], axis=1)


class _IntegralTable:
    """Cumulative integral of g on [a, b].

    Each panel stores the Legendre antiderivative of the degree-15
    interpolant through its Gauss points, so evaluation inside a panel is a
    short Clenshaw recurrence.
    """

    def __init__(self, node: Integral):
        self.a, self.b = node.lower, node.upper
        self.g = node.integrand
        npan = 8
        prev = None
        while True:
            knots = np.linspace(self.a, self.b, npan + 1)
            coef = self._antiderivatives(knots)
            # panel integral = F(1) - F(-1) with F(-1) = 0
            cum = np.concatenate([[0.0], np.cumsum(L.legval(1.0, coef.T))])
            if prev is not None:
                err = np.max(np.abs(cum[::2] - prev))
                if err <= 1e-14 * max(1.0, np.max(np.abs(cum))) or npan >= 4096:
                    break
            prev = cum
            npan *= 2
        self.knots, self.cum, self.coef = knots, cum, coef
        self._rows = [list(c) for c in coef]
        self._kn = list(knots)

    def _antiderivatives(self, knots):
        lo, hi = knots[:-1], knots[1:]
        half = 0.5 * (hi - lo)
        pts = 0.5 * (hi + lo)[:, None] + half[:, None] * _GL_X[None, :]
        vals = np.asarray(self.g(pts.ravel()), dtype=float).reshape(pts.shape)
        c = (vals * _GL_W) @ _LEG_PROJ  # Legendre coefficients of the interpolant
        C = L.legint(c, axis=1, lbnd=-1.0)
        return C * half[:, None]

    def _scalar(self, x):
        if x < self.a - 1e-12 or x > self.b + 1e-12:
            return math.nan
        k = min(max(bisect.bisect_right(self._kn, x) - 1, 0), len(self._kn) - 2)
        lo, hi = self._kn[k], self._kn[k + 1]
        t = (2.0 * x - lo - hi) / (hi - lo)
        row = self._rows[k]
        b1 = b2 = 0.0
        for j in range(len(row) - 1, 0, -1):
            b1, b2 = row[j] + (2 * j + 1) * t * b1 / (j + 1) - (j + 1) * b2 / (j + 2), b1
        return self.cum[k] + row[0] + t * b1 - 0.5 * b2

    def __call__(self, x):
        if isinstance(x, (float, int)) or np.ndim(x) == 0:
            return self._scalar(float(x))
        xa = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, xa, side="right") - 1, 0, len(self.knots) - 2)
        lo, hi = self.knots[idx], self.knots[idx + 1]
        t = (2.0 * xa - lo - hi) / (hi - lo)
        out = self.cum[idx] + L.legval(t, np.moveaxis(self.coef[idx], -1, 0), tensor=False)
        return np.where((xa < self.a - 1e-12) | (xa > self.b + 1e-12), np.nan, out)


@lru_cache(maxsize=256)
def _integral_table(node: Integral) -> _IntegralTable:
    return _IntegralTable(node)


# ---------------------------------------------------------------------------
# compilation to straight-line code
# ---------------------------------------------------------------------------

_MATH_NS = {name: getattr(math, name) for name in FUNCTIONS}
_NP_NS = {name: getattr(np, name) for name in FUNCTIONS}


def _compile(root: Expr):
    order: list[Expr] = []
    names: dict[Expr, str] = {}

    def visit(e):
        stack = [(e, False)]
        while stack:
            node, done = stack.pop()
            if node in names:
                continue
            if done:
                names[node] = f"t{len(names)}"
                order.append(node)
                continue
            stack.append((node, True))
            # integrands are evaluated by the quadrature table, not inline
            kids = () if isinstance(node, Integral) else node.children()
            for c in reversed(kids):
                if c not in names:
                    stack.append((c, False))

    visit(root)
    helpers = {}
    lines = []
    for node in order:
        nm = names[node]
        if isinstance(node, Const):
            rhs = repr(node.value)
        elif isinstance(node, Var):
            rhs = "x"
        elif isinstance(node, _Binary):
            op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
            rhs = f"{names[node.a]} {op} {names[node.b]}"
        elif isinstance(node, Neg):
            rhs = f"-{names[node.a]}"
        elif isinstance(node, Pow):
            rhs = f"POW({names[node.a]}, {node.p!r})"
        elif isinstance(node, Func):
            rhs = f"{node.name}({names[node.a]})"
        elif isinstance(node, Step):
            rhs = f"STEP({names[node.a]}, {node.order})"
        elif isinstance(node, Integral):
            h = f"I{len(helpers)}"
            helpers[h] = node
            rhs = f"{h}(x)"
        else:  # pragma: no cover
            raise TypeError(type(node))
        lines.append(f"    {nm} = {rhs}")
    body = "\n".join(lines) + f"\n    return {names[root]}\n"
    src = "def _f(x):\n" + body

    def integral_helper(node):
        def call(x):
            return _integral_table(node)(x)
        return call

    def scalar_pow(a, p):
        if a < 0.0 and not p.is_integer():
            raise ValueError("negative base")
        return a ** p

    ns_s = dict(_MATH_NS, POW=scalar_pow, STEP=smooth_step)
    ns_v = dict(_NP_NS, POW=np.power, STEP=smooth_step)
    for h, node in helpers.items():
        ns_s[h] = integral_helper(node)
        ns_v[h] = integral_helper(node)
    exec(src, ns_s)
    exec(src, ns_v)
    return ns_s["_f"], ns_v["_f"]


# ---------------------------------------------------------------------------
# printing and parsing
# ---------------------------------------------------------------------------

def _num(v: float) -> str:
    s = repr(float(v))
    return f"({s})" if s.startswith("-") else s


def _to_str(root: Expr) -> str:
    memo: dict[Expr, str] = {}

    def go(e):
        if e in memo:
            return memo[e]
        if isinstance(e, Const):
            s = _num(e.value)
        elif isinstance(e, Var):
            s = "r"
        elif isinstance(e, _Binary):
            op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
            s = f"({go(e.a)} {op} {go(e.b)})"
        elif isinstance(e, Neg):
            s = f"(-{go(e.a)})"
        elif isinstance(e, Pow):
            s = f"({go(e.a)} ^ {_num(e.p)})"
        elif isinstance(e, Func):
            s = f"{e.name}({go(e.a)})"
        elif isinstance(e, Step):
            s = f"step({go(e.a)}, {e.order})" if e.order else f"step({go(e.a)})"
        elif isinstance(e, Integral):
            s = f"integral({go(e.integrand)}, {_num(e.lower)}, {_num(e.upper)})"
        else:  # pragma: no cover
            raise TypeError(type(e))
        memo[e] = s
        return s

    return go(root)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf|nan)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group("num") is not None:
            out.append(("num", m.group("num")))
        elif m.group("name") is not None:
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            raise ExprSyntaxError(f"expected {value or kind}, got {tok[1]!r}")
        self.i += 1
        return tok

    def expr(self):
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            p = self.unary()
            if not isinstance(p, Const):
                raise ExprSyntaxError("exponent must be a numeric constant")
            return power(base, p.value)
        return base

    def number(self):
        e = self.unary()
        if not isinstance(e, Const):
            raise ExprSyntaxError("expected a numeric constant")
        return e.value

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return Const(float(val))
        if kind == "op" and val == "(":
            self.take()
            e = self.expr()
            self.take("op", ")")
            return e
        if kind == "name":
            self.take()
            if val == "r":
                return r
            self.take("op", "(")
            if val in FUNCTIONS:
                arg = self.expr()
                self.take("op", ")")
                return _func(val)(arg)
            if val == "step":
                arg = self.expr()
                k = 0
                if self.peek() == ("op", ","):
                    self.take()
                    k = self.number()
                    if not float(k).is_integer():
                        raise ExprSyntaxError("step order must be an integer")
                self.take("op", ")")
                return step(arg, int(k))
            if val == "integral":
                g = self.expr()
                self.take("op", ",")
                lo = self.number()
                self.take("op", ",")
                hi = self.number()
                self.take("op", ")")
                return integral(g, lo, hi)
            raise ExprSyntaxError(f"unknown function {val!r}")
        raise ExprSyntaxError(f"unexpected token {val!r}")


def parse(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    if p.peek()[0] != "end":
        raise ExprSyntaxError(f"trailing input at token {p.peek()[1]!r}")
    return e
