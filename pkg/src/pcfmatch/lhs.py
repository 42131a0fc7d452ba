"""Left-hand sides: rational functions gamma(c)/delta(c) of one constant.

An :class:`LhsExpression` carries integer polynomials in ``x`` plus the
constant substituted for ``x`` and a wrapper (``identity`` or
``reciprocal``).  Its canonical form always uses the identity wrapper: the
reciprocal of gamma/delta is delta/gamma.  Canonical means primitive over the
joint coefficient set, positive leading coefficient of delta, and gamma,
delta coprime as polynomials.

Text form: ``(<gamma>)/(<delta>) @ <constant>``, e.g. ``(x)/(x - 2) @ e``.

:class:`FormulaLhs` covers the few known identities whose left side mixes
constants or functions (``6/(8*G - pi*acosh(2))``); it only supports numeric
evaluation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Iterator

from . import _expr, numerics
from .poly import IntPolynomial, qadd, qdivmod, qgcd, qmul, qneg, to_primitive_ints

IDENTITY = "identity"
RECIPROCAL = "reciprocal"
WRAPPERS = (IDENTITY, RECIPROCAL)

NEAR_POLE_MARGIN = Decimal("1e-6")
NEAR_POLE_DIGITS = 30


class NearPoleError(ArithmeticError):
    pass


class TrivialExpressionError(ValueError):
    pass


def _decimal_poly(p: IntPolynomial, x: Decimal) -> tuple[Decimal, Decimal]:
    """(p(x), sum |c_i| |x|^i) under the current context."""
    acc = Decimal(0)
    mag = Decimal(0)
    ax = abs(x)
    for c in reversed(p.coeffs):
        acc = acc * x + c
        mag = mag * ax + abs(c)
    return acc, mag


def _proportional(g: IntPolynomial, d: IntPolynomial) -> bool:
    """gamma = k * delta for a rational k (k = 0 included)."""
    if g.is_zero():
        return True
    if g.degree != d.degree:
        return False
    return all(gc * d.leading == dc * g.leading for gc, dc in zip(g.coeffs, d.coeffs))


@dataclass(frozen=True)
class LhsExpression:
    gamma: IntPolynomial
    delta: IntPolynomial
    constant: str
    wrapper: str = IDENTITY

    def __post_init__(self):
        gamma = self.gamma if isinstance(self.gamma, IntPolynomial) else IntPolynomial(tuple(self.gamma))
        delta = self.delta if isinstance(self.delta, IntPolynomial) else IntPolynomial(tuple(self.delta))
        if self.wrapper not in WRAPPERS:
            raise ValueError(f"unknown wrapper {self.wrapper!r}")
        if delta.is_zero():
            raise TrivialExpressionError("delta is the zero polynomial")
        if _proportional(gamma, delta):
            raise TrivialExpressionError("gamma is proportional to delta (constant value)")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "constant", numerics.canonical_name(self.constant))

    @property
    def constants(self) -> tuple[str, ...]:
        return (self.constant,)

    def numerator_denominator(self) -> tuple[IntPolynomial, IntPolynomial]:
        """(num, den) of the value as one rational function, wrapper applied."""
        if self.wrapper == RECIPROCAL:
            return self.delta, self.gamma
        return self.gamma, self.delta

    def canonical(self) -> "LhsExpression":
        num, den = self.numerator_denominator()
        g = qgcd(tuple(Fraction(c) for c in num.coeffs), tuple(Fraction(c) for c in den.coeffs))
        nq = tuple(Fraction(c) for c in num.coeffs)
        dq = tuple(Fraction(c) for c in den.coeffs)
        if len(g) > 1:
            nq, dq = qdivmod(nq, g)[0], qdivmod(dq, g)[0]
        n_int, d_int = to_primitive_ints(nq, dq)
        if d_int[-1] < 0:
            n_int, d_int = tuple(-c for c in n_int), tuple(-c for c in d_int)
        return LhsExpression(IntPolynomial(n_int), IntPolynomial(d_int), self.constant, IDENTITY)

    def is_canonical(self) -> bool:
        return self == self.canonical()

    def value(self, digits: int) -> Decimal:
        return lhs_value(self, digits)

    def format(self) -> str:
        body = f"({self.gamma.format('x')})/({self.delta.format('x')})"
        if self.wrapper == RECIPROCAL:
            body = f"1/({body})"
        return f"{body} @ {self.constant}"

    __str__ = format

    @classmethod
    def parse(cls, text: str) -> "LhsExpression":
        """Parse ``(<gamma>)/(<delta>) @ <constant>``; the result is canonical."""
        expr, sep, const = text.rpartition("@")
        if not sep:
            raise ValueError(f"LHS text needs '@ <constant>': {text!r}")
        num, den = rational_function(expr, {"x"})
        return _from_qpolys(num, den, const.strip())


def lhs_value(expr, digits: int) -> Decimal:
    """wrapper(gamma(c)/delta(c)) to ``digits`` significant digits.

    The working precision grows with the cancellation seen in the denominator,
    so near-singular expressions still come out correct; a denominator below
    10**(-digits) is rejected as a near pole.
    """
    if isinstance(expr, FormulaLhs):
        return expr.value(digits)
    num, den = expr.numerator_denominator()
    work = digits + numerics.GUARD_DIGITS
    for _ in range(4):
        c = numerics.constant_value(expr.constant, work, max_digits=10**6)
        with localcontext() as ctx:
            ctx.prec = work
            dv, dmag = _decimal_poly(den, c)
            if dv == 0 or abs(dv) < Decimal(10) ** (-digits):
                raise NearPoleError(f"|denominator| < 1e-{digits} for {expr}")
            lost = max(0, math.ceil(float((dmag / abs(dv)).log10())))
            if lost <= work - digits - numerics.GUARD_DIGITS:
                nv, _ = _decimal_poly(num, c)
                return numerics.round_to(nv / dv, digits)
        work = digits + numerics.GUARD_DIGITS + lost + 2
    raise NearPoleError(f"cancellation too severe for {expr}")


def near_pole(expr: LhsExpression) -> bool:
    """True if |denominator(c)| < 1e-6 at 30 digits."""
    _, den = expr.numerator_denominator()
    c = numerics.constant_value(expr.constant, NEAR_POLE_DIGITS)
    with localcontext() as ctx:
        ctx.prec = NEAR_POLE_DIGITS
        return abs(_decimal_poly(den, c)[0]) < NEAR_POLE_MARGIN


# -- rational-function extraction from formulas ----------------------------


class _NotRational(Exception):
    pass


class _RationalSemantics:
    """Fold an expression into (num, den) rational polynomials in one symbol."""

    def __init__(self, symbols: set[str] | None):
        self.symbols = symbols  # None: any registered constant name
        self.seen: set[str] = set()

    def num(self, text):
        v = Fraction(text)
        return ((v,) if v else ()), (Fraction(1),)

    def _symbol(self, name):
        self.seen.add(name)
        if len(self.seen) > 1:
            raise _NotRational("more than one constant")
        return (Fraction(0), Fraction(1)), (Fraction(1),)

    def name(self, name):
        if self.symbols is not None:
            if name not in self.symbols:
                raise _expr.ExpressionError(f"unknown symbol {name!r}")
            return self._symbol(name)
        if name in numerics.REGISTRY:
            return self._symbol(numerics.canonical_name(name))
        raise _expr.ExpressionError(f"unknown constant {name!r}")

    def call(self, name, args):
        if self.symbols is None and name == "zeta" and args == [((Fraction(3),), (Fraction(1),))]:
            return self._symbol("zeta3")
        raise _NotRational(name)

    def neg(self, a):
        return qneg(a[0]), a[1]

    def add(self, a, b):
        return qadd(qmul(a[0], b[1]), qmul(b[0], a[1])), qmul(a[1], b[1])

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        return qmul(a[0], b[0]), qmul(a[1], b[1])

    def div(self, a, b):
        if not b[0]:
            raise ZeroDivisionError("division by zero in formula")
        return qmul(a[0], b[1]), qmul(a[1], b[0])

    def pow(self, a, b):
        num, den = b
        if len(num) > 1 or len(den) > 1:
            raise _NotRational("symbolic exponent")
        e = num[0] / den[0] if num else Fraction(0)
        if e.denominator != 1:
            raise _NotRational("fractional exponent")
        e = int(e)
        base = a if e >= 0 else (a[1], a[0])
        if e < 0 and not a[0]:
            raise ZeroDivisionError("zero to a negative power")
        out = ((Fraction(1),), (Fraction(1),))
        for _ in range(abs(e)):
            out = self.mul(out, base)
        return out


def rational_function(text: str, symbols: set[str] | None = None):
    """(num, den) QPolys of ``text`` as a rational function of its one symbol."""
    sem = _RationalSemantics(symbols)
    num, den = _expr.fold(_expr.parse(text), sem)
    return num, den


def _from_qpolys(num, den, constant: str) -> LhsExpression:
    if not den:
        raise ZeroDivisionError("zero denominator")
    n_int, d_int = to_primitive_ints(num, den)
    return LhsExpression(IntPolynomial(n_int), IntPolynomial(d_int), constant).canonical()


def parse_formula(text: str):
    """An :class:`LhsExpression` when ``text`` is rational in one registered
    constant (``e/(e-2)``, ``16/(pi^2 - 4)``, ``8/(7*zeta(3))``), else a
    :class:`FormulaLhs`."""
    sem = _RationalSemantics(None)
    try:
        num, den = _expr.fold(_expr.parse(text), sem)
    except _NotRational:
        return FormulaLhs(text)
    if len(sem.seen) != 1:
        return FormulaLhs(text)
    return _from_qpolys(num, den, next(iter(sem.seen)))


# -- general numeric formulas ----------------------------------------------


class _DecimalSemantics:
    def __init__(self, digits: int):
        self.digits = digits

    def num(self, text):
        return Decimal(text)

    def name(self, name):
        return numerics.constant_value(name, self.digits, max_digits=10**6)

    def call(self, name, args):
        if name == "zeta" and args == [3]:
            return numerics.constant_value("zeta3", self.digits, max_digits=10**6)
        (x,) = args
        if name == "sqrt":
            return x.sqrt()
        if name in ("log", "ln"):
            return x.ln()
        if name == "exp":
            return x.exp()
        if name == "acosh":
            return (x + (x * x - 1).sqrt()).ln()
        raise _expr.ExpressionError(f"unsupported function {name!r}")

    def neg(self, a):
        return -a

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def pow(self, a, b):
        if b == b.to_integral_value():
            return a ** int(b)
        return a**b


@dataclass(frozen=True)
class FormulaLhs:
    text: str

    @property
    def constants(self) -> tuple[str, ...]:
        found = set()
        for name in _expr.names(_expr.parse(self.text)):
            if name in numerics.REGISTRY:
                found.add(numerics.canonical_name(name))
        return tuple(sorted(found))

    def value(self, digits: int) -> Decimal:
        work = digits + 2 * numerics.GUARD_DIGITS
        with localcontext() as ctx:
            ctx.prec = work
            v = _expr.fold(_expr.parse(self.text), _DecimalSemantics(work))
        return numerics.round_to(v, digits)

    def format(self) -> str:
        return self.text

    __str__ = format

    def canonical(self) -> "FormulaLhs":
        return self


# -- enumeration -----------------------------------------------------------


@dataclass(frozen=True)
class LhsSpace:
    """Finite LHS family.

    Enumeration order: constant (as listed), then wrapper (as listed), then
    gamma coefficient tuples, then delta coefficient tuples, both in
    ``itertools.product`` order over ``range(lo, hi + 1)`` with the constant
    term first.  Only canonical, non-trivial, non-near-pole forms are yielded,
    each exactly once; a reciprocal-wrapper form is skipped when its canonical
    identity form is already an identity member of the space.
    """

    constants: tuple[str, ...]
    gamma_degree: int = 1
    delta_degree: int = 1
    coef_range: tuple[int, int] = (-2, 2)
    wrappers: tuple[str, ...] = (IDENTITY, RECIPROCAL)

    def __post_init__(self):
        object.__setattr__(self, "constants", tuple(numerics.canonical_name(c) for c in self.constants))
        object.__setattr__(self, "wrappers", tuple(self.wrappers))
        object.__setattr__(self, "coef_range", tuple(self.coef_range))
        for w in self.wrappers:
            if w not in WRAPPERS:
                raise ValueError(f"unknown wrapper {w!r}")
        if self.coef_range[0] > self.coef_range[1]:
            raise ValueError("empty coefficient range")
        if min(self.gamma_degree, self.delta_degree) < 0:
            raise ValueError("degrees must be non-negative")

    def raw_size(self) -> int:
        width = self.coef_range[1] - self.coef_range[0] + 1
        per = width ** (self.gamma_degree + 1) * width ** (self.delta_degree + 1)
        return per * len(self.constants) * len(self.wrappers)

    def _in_identity_part(self, num: IntPolynomial, den: IntPolynomial) -> bool:
        lo, hi = self.coef_range
        return (
            IDENTITY in self.wrappers
            and num.degree <= self.gamma_degree
            and den.degree <= self.delta_degree
            and all(lo <= c <= hi for c in num.coeffs + den.coeffs)
        )

    def to_json(self) -> dict:
        return {
            "constants": list(self.constants),
            "gamma_degree": self.gamma_degree,
            "delta_degree": self.delta_degree,
            "coef_range": list(self.coef_range),
            "wrappers": list(self.wrappers),
        }


def enumerate_lhs(space: LhsSpace) -> Iterator[LhsExpression]:
    lo, hi = space.coef_range
    values = range(lo, hi + 1)
    for constant in space.constants:
        for wrapper in space.wrappers:
            for g in itertools.product(values, repeat=space.gamma_degree + 1):
                gamma = IntPolynomial(g)
                if gamma.is_zero():
                    continue
                for d in itertools.product(values, repeat=space.delta_degree + 1):
                    delta = IntPolynomial(d)
                    if delta.is_zero() or _proportional(gamma, delta):
                        continue
                    # cheap necessary conditions before the exact canonical form
                    if (delta if wrapper == IDENTITY else gamma).leading < 0:
                        continue
                    if math.gcd(gamma.content(), delta.content()) != 1:
                        continue
                    expr = LhsExpression(gamma, delta, constant, wrapper)
                    canon = expr.canonical()
                    if wrapper == IDENTITY:
                        if canon != expr:
                            continue
                    elif not _swap_is_canonical(expr, canon) or space._in_identity_part(canon.gamma, canon.delta):
                        continue
                    if near_pole(canon):
                        continue
                    yield canon


def _swap_is_canonical(expr: LhsExpression, canon: LhsExpression) -> bool:
    """A reciprocal member counts when (delta, gamma) is already canonical, the
    same rule the identity members obey; swapping is injective so each
    canonical form has at most one such producer."""
    return expr.gamma == canon.delta and expr.delta == canon.gamma


def lhs_space_size(space: LhsSpace) -> int:
    return sum(1 for _ in enumerate_lhs(space))
