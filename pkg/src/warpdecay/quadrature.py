"""Adaptive Simpson quadrature."""
import math


def adaptive_simpson(f, a, b, rtol=1e-8, atol=1e-300, max_depth=60):
    """Integrate a scalar function on [a, b] by recursive Simpson bisection.

    Returns ``(value, error_estimate)``. Raises ``ArithmeticError`` when
    the recursion bottoms out without meeting the tolerance.
    """
    if a == b:
        return 0.0, 0.0
    if b < a:
        v, e = adaptive_simpson(f, b, a, rtol, atol, max_depth)
        return -v, e
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    # absolute target from a coarse magnitude estimate so tiny subintervals
    # are not held to an unreachable relative standard
    scale = abs(whole)
    total_err = [0.0]

    def rec(a, b, fa, fm, fb, whole, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) * (fa + 4 * flm + fm) / 6
        right = (b - m) * (fm + 4 * frm + fb) / 6
        delta = left + right - whole
        tol = max(rtol * scale, atol) * (b - a) / width
        if abs(delta) <= 15 * tol and depth > 3:
            total_err[0] += abs(delta) / 15
            return left + right + delta / 15
        if depth >= max_depth:
            raise ArithmeticError(f"adaptive Simpson did not converge near r = {m!r}")
        return (rec(a, m, fa, flm, fm, left, depth + 1)
                + rec(m, b, fm, frm, fb, right, depth + 1))

    width = b - a
    value = rec(a, b, fa, fm, fb, whole, 0)
    if not math.isfinite(value):
        raise ArithmeticError("integrand produced a non-finite value")
    return value, total_err[0]
