"""Integer-coefficient polynomials in one variable."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import _expr


@dataclass(frozen=True)
class IntPolynomial:
    """Coefficients constant term first; trailing zeros are trimmed.

    The zero polynomial has ``coeffs == ()`` and degree -1.
    """

    coeffs: tuple[int, ...] = ()

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        for c in coeffs:
            if isinstance(c, bool) or not isinstance(c, int):
                # numpy integers and Fractions with denominator 1 are accepted
                if isinstance(c, Fraction) and c.denominator == 1:
                    continue
                if not hasattr(c, "__index__"):
                    raise TypeError(f"coefficient {c!r} is not an integer")
        coeffs = tuple(int(c) for c in coeffs)
        end = len(coeffs)
        while end and coeffs[end - 1] == 0:
            end -= 1
        object.__setattr__(self, "coeffs", coeffs[:end])

    @classmethod
    def of(cls, *coeffs: int) -> "IntPolynomial":
        return cls(tuple(coeffs))

    @classmethod
    def parse(cls, text: str, var: str = "n") -> "IntPolynomial":
        """Parse ``"3*n^2 + 7*n + 3"``, ``"(2n+1)(3n(n+1)+1)"`` and the like."""
        coeffs = parse_rational_poly(text, var)
        if any(c.denominator != 1 for c in coeffs):
            raise _expr.ExpressionError(f"non-integer coefficients in {text!r}")
        return cls(tuple(int(c) for c in coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        acc = 0 * x
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def content(self) -> int:
        g = 0
        for c in self.coeffs:
            g = math.gcd(g, c)
        return g

    def __neg__(self):
        return IntPolynomial(tuple(-c for c in self.coeffs))

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return IntPolynomial(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if isinstance(other, int):
            return IntPolynomial(tuple(other * c for c in self.coeffs))
        other = _as_poly(other)
        if self.is_zero() or other.is_zero():
            return IntPolynomial()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return IntPolynomial(tuple(out))

    __rmul__ = __mul__

    def exact_div(self, k: int) -> "IntPolynomial":
        if any(c % k for c in self.coeffs):
            raise ValueError(f"{self} is not divisible by {k}")
        return IntPolynomial(tuple(c // k for c in self.coeffs))

    def shift(self, k: int) -> "IntPolynomial":
        """The polynomial ``x -> self(x + k)`` (Taylor shift, exact)."""
        out = IntPolynomial()
        base = IntPolynomial((k, 1))
        for c in reversed(self.coeffs):
            out = out * base + c
        return out

    def integer_roots(self) -> list[int]:
        """All integer roots (rational-root candidates, checked exactly)."""
        if self.is_zero():
            raise ValueError("the zero polynomial vanishes everywhere")
        roots = []
        low = 0
        while self.coeffs[low] == 0:
            low += 1
        if low:
            roots.append(0)
        for d in _divisors(abs(self.coeffs[low])):
            for r in (d, -d):
                if self(r) == 0:
                    roots.append(r)
        return sorted(roots)

    def natural_roots(self, modulus: int = 1, residue: int = 0) -> list[int]:
        """Roots n >= 1 with ``n % modulus == residue``."""
        return [r for r in self.integer_roots() if r >= 1 and r % modulus == residue % modulus]

    def root_bound(self) -> int:
        """Every real root lies strictly below this integer (Cauchy bound)."""
        if self.degree < 1:
            return 0
        lead = abs(self.leading)
        return 1 + math.ceil(max(Fraction(abs(c), lead) for c in self.coeffs[:-1]))

    def format(self, var: str = "n") -> str:
        if self.is_zero():
            return "0"
        parts = []
        for power in range(self.degree, -1, -1):
            c = self.coeffs[power]
            if c == 0:
                continue
            mag = abs(c)
            if power == 0:
                body = str(mag)
            else:
                mono = var if power == 1 else f"{var}^{power}"
                body = mono if mag == 1 else f"{mag}*{mono}"
            if not parts:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(("- " if c < 0 else "+ ") + body)
        return " ".join(parts)

    def __str__(self):
        return self.format()

    def __repr__(self):
        return f"IntPolynomial({self.format()!r})"


def _as_poly(value) -> IntPolynomial:
    if isinstance(value, IntPolynomial):
        return value
    if isinstance(value, int):
        return IntPolynomial((value,))
    raise TypeError(f"cannot combine IntPolynomial with {type(value).__name__}")


def _divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


# -- rational polynomial arithmetic (parsing, canonical forms) -------------

QPoly = tuple  # tuple[Fraction, ...], constant term first, trimmed


def qtrim(p: Sequence[Fraction]) -> QPoly:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(Fraction(c) for c in p)


def qadd(a: QPoly, b: QPoly) -> QPoly:
    n = max(len(a), len(b))
    return qtrim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def qneg(a: QPoly) -> QPoly:
    return tuple(-c for c in a)


def qmul(a: QPoly, b: QPoly) -> QPoly:
    if not a or not b:
        return ()
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return qtrim(out)


def qdivmod(a: QPoly, b: QPoly) -> tuple[QPoly, QPoly]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    rem = list(a)
    quot = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    while len(rem) >= len(b) and rem:
        factor = rem[-1] / b[-1]
        shift = len(rem) - len(b)
        quot[shift] = factor
        for i, c in enumerate(b):
            rem[shift + i] -= factor * c
        rem = list(qtrim(rem))
    return qtrim(quot), qtrim(rem)


def qgcd(a: QPoly, b: QPoly) -> QPoly:
    while b:
        a, b = b, qdivmod(a, b)[1]
    if not a:
        return ()
    return tuple(c / a[-1] for c in a)


def to_primitive_ints(*polys: QPoly) -> tuple[tuple[int, ...], ...]:
    """Scale several rational polynomials jointly to coprime integer ones."""
    den = 1
    for p in polys:
        for c in p:
            den = den * c.denominator // math.gcd(den, c.denominator)
    ints = [tuple(int(c * den) for c in p) for p in polys]
    g = 0
    for p in ints:
        for c in p:
            g = math.gcd(g, c)
    g = g or 1
    return tuple(tuple(c // g for c in p) for p in ints)


class _PolySemantics:
    def __init__(self, var: str):
        self.var = var

    def num(self, text):
        return (Fraction(text),) if Fraction(text) != 0 else ()

    def name(self, name):
        if name != self.var:
            raise _expr.ExpressionError(f"unknown symbol {name!r} (expected {self.var!r})")
        return (Fraction(0), Fraction(1))

    def call(self, name, args):
        raise _expr.ExpressionError(f"function {name!r} not allowed in a polynomial")

    def neg(self, a):
        return qneg(a)

    def add(self, a, b):
        return qadd(a, b)

    def sub(self, a, b):
        return qadd(a, qneg(b))

    def mul(self, a, b):
        return qmul(a, b)

    def div(self, a, b):
        if len(b) != 1:
            raise _expr.ExpressionError("only division by a nonzero constant is allowed")
        return tuple(c / b[0] for c in a)

    def pow(self, a, b):
        if len(b) > 1 or (b and (b[0].denominator != 1 or b[0] < 0)):
            raise _expr.ExpressionError("exponent must be a non-negative integer")
        out: QPoly = (Fraction(1),)
        for _ in range(int(b[0]) if b else 0):
            out = qmul(out, a)
        return out


def parse_rational_poly(text: str, var: str = "n") -> QPoly:
    return _expr.fold(_expr.parse(text), _PolySemantics(var))


def polys_from(values: Iterable) -> tuple[IntPolynomial, ...]:
    out = []
    for v in values:
        if isinstance(v, IntPolynomial):
            out.append(v)
        elif isinstance(v, str):
            out.append(IntPolynomial.parse(v))
        else:
            out.append(IntPolynomial(tuple(v)))
    return tuple(out)
