import itertools

import mpmath
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from pcfmatch import lhs as L
from pcfmatch.poly import IntPolynomial
from oracles import mp_constant

x = sympy.Symbol("x")


def as_sympy(expr):
    num, den = expr.numerator_denominator()
    p = sum(c * x**i for i, c in enumerate(num.coeffs))
    q = sum(c * x**i for i, c in enumerate(den.coeffs))
    return sympy.cancel(p / q)


def brute_force(space):
    """Distinct non-constant rational functions reachable in the raw box."""
    lo, hi = space.coef_range
    out = set()
    c = float(mp_constant(space.constants[0], 30))
    for wrapper in space.wrappers:
        for g in itertools.product(range(lo, hi + 1), repeat=space.gamma_degree + 1):
            for d in itertools.product(range(lo, hi + 1), repeat=space.delta_degree + 1):
                gp = sum(v * x**i for i, v in enumerate(g))
                dp = sum(v * x**i for i, v in enumerate(d))
                if gp == 0 or dp == 0:
                    continue
                f = sympy.cancel(gp / dp if wrapper == L.IDENTITY else dp / gp)
                if f.free_symbols and abs(float(sympy.denom(f).subs(x, c))) >= 1e-6:
                    out.add(f)
    return out


@pytest.mark.parametrize("constant", ["e", "pi"])
def test_enumeration_matches_brute_force(constant):
    space = L.LhsSpace((constant,), 1, 1, (-2, 2))
    got = [as_sympy(e) for e in L.enumerate_lhs(space)]
    assert len(got) == len(set(got)), "duplicate LHS forms"
    assert set(got) == brute_force(space)
    assert L.lhs_space_size(space) == len(got)


def test_enumeration_is_canonical_and_ordered():
    space = L.LhsSpace(("e", "pi"), 1, 1, (-1, 1))
    exprs = list(L.enumerate_lhs(space))
    assert all(e.is_canonical() for e in exprs)
    consts = [e.constant for e in exprs]
    assert consts == sorted(consts, key=["e", "pi"].index)


@given(st.lists(st.integers(-9, 9), min_size=1, max_size=3), st.lists(st.integers(-9, 9), min_size=1, max_size=3),
       st.sampled_from(["e", "pi", "zeta3", "catalan"]))
def test_value_matches_mpmath(g, d, constant):
    try:
        expr = L.LhsExpression(IntPolynomial(tuple(g)), IntPolynomial(tuple(d)), constant)
        value = L.lhs_value(expr, 60)
    except (L.TrivialExpressionError, L.NearPoleError):
        return
    c = mp_constant(constant, 100)
    ref = sum(v * c**i for i, v in enumerate(g)) / sum(v * c**i for i, v in enumerate(d))
    assert abs(mpmath.mpf(str(value)) - ref) <= mpmath.mpf(10) ** -58 * max(1, abs(ref))


def test_canonical_form():
    expr = L.LhsExpression(IntPolynomial((2, 4)), IntPolynomial((-6, -2)), "e")
    canon = expr.canonical()
    assert canon.gamma.coeffs == (-1, -2) and canon.delta.coeffs == (3, 1)
    recip = L.LhsExpression(IntPolynomial((1,)), IntPolynomial((-2, 1)), "e", L.RECIPROCAL)
    assert recip.canonical() == L.LhsExpression(IntPolynomial((-2, 1)), IntPolynomial((1,)), "e")


def test_trivial_rejected():
    with pytest.raises(L.TrivialExpressionError):
        L.LhsExpression(IntPolynomial((2, 4)), IntPolynomial((1, 2)), "pi")


def test_near_pole():
    # 22 - 7x vanishes near pi to 3e-3, far from a pole at 30 digits; 355 - 113 x is 3e-5
    assert not L.near_pole(L.LhsExpression(IntPolynomial((1,)), IntPolynomial((22, -7)), "pi"))
    with pytest.raises(L.NearPoleError):
        L.lhs_value(L.LhsExpression(IntPolynomial((1,)), IntPolynomial((355, -113)), "pi"), 4)


@pytest.mark.parametrize(
    "text, constant, num, den",
    [
        ("e/(e-2)", "e", (0, 1), (-2, 1)),
        ("16/(pi^2-4)", "pi", (16,), (-4, 0, 1)),
        ("8/(7*zeta(3))", "zeta3", (8,), (0, 7)),
        ("2/(-1+2G)", "catalan", (2,), (-1, 2)),
    ],
)
def test_parse_formula_rational(text, constant, num, den):
    expr = L.parse_formula(text)
    assert isinstance(expr, L.LhsExpression)
    assert (expr.constant, expr.gamma.coeffs, expr.delta.coeffs) == (constant, num, den)


def test_parse_formula_general():
    expr = L.parse_formula("6/(8*G-pi*acosh(2))")
    assert isinstance(expr, L.FormulaLhs)
    assert expr.constants == ("catalan", "pi")
    ref = 6 / (8 * mpmath.catalan - mpmath.pi * mpmath.acosh(2))
    assert abs(mpmath.mpf(str(expr.value(50))) - ref) < mpmath.mpf(10) ** -48


def test_format_parse_round_trip():
    expr = L.parse_formula("(3+e)/(2*e-5)")
    assert L.LhsExpression.parse(expr.format()) == expr
