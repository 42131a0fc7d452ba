"""Independent reference implementations used by the tests.

None of these share code with the package: continued fractions are folded
top-down (from the deepest term outwards) with Fraction or mpmath, which is
a different algorithm from the forward three-term recurrence.
"""
from __future__ import annotations

from fractions import Fraction

import mpmath

# comparisons in the tests run at this precision
mpmath.mp.dps = 120


def poly_at(coeffs, n):
    return sum(c * n**i for i, c in enumerate(coeffs))


def top_down(a0, a, b, depth):
    """a0 + b(1)/(a(1) + b(2)/(a(2) + ... + b(depth)/a(depth))) as a Fraction."""
    if depth == 0:
        return Fraction(a0)
    tail = Fraction(a(depth))
    for n in range(depth - 1, 0, -1):
        tail = a(n) + Fraction(b(n + 1)) / tail
    return a0 + Fraction(b(1)) / tail


def mp_limit(a0, a, b, depth, dps=60):
    """Backward evaluation at ``dps`` digits (ignores tail beyond ``depth``)."""
    with mpmath.workdps(dps + 10):
        t = mpmath.mpf(a(depth))
        for n in range(depth - 1, 0, -1):
            t = a(n) + mpmath.mpf(b(n + 1)) / t
        return +(a0 + mpmath.mpf(b(1)) / t)


def mp_constant(name, dps=60):
    with mpmath.workdps(dps + 10):
        table = {
            "e": mpmath.e,
            "pi": mpmath.pi,
            "zeta3": mpmath.zeta(3),
            "catalan": mpmath.catalan,
            "phi": mpmath.phi,
            "pi_squared": mpmath.pi**2,
        }
        return +table[name]


def mp_digits_agree(x, y):
    """-log10 of the relative difference (inf when equal)."""
    if x == y:
        return float("inf")
    return float(-mpmath.log10(abs(x - y) / max(abs(x), abs(y), 1)))
