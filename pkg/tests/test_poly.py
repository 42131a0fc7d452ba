import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

import pytest

from pcfmatch import _expr
from pcfmatch.poly import IntPolynomial

coeffs = st.lists(st.integers(-20, 20), min_size=1, max_size=5)
n = sympy.Symbol("n")


def to_sympy(p):
    return sympy.Integer(0) + sum(c * n**i for i, c in enumerate(p.coeffs))


@given(coeffs, coeffs)
@settings(max_examples=200)
def test_arithmetic_matches_sympy(a, b):
    p, q = IntPolynomial(tuple(a)), IntPolynomial(tuple(b))
    assert sympy.expand(to_sympy(p + q) - (to_sympy(p) + to_sympy(q))) == 0
    assert sympy.expand(to_sympy(p * q) - to_sympy(p) * to_sympy(q)) == 0
    assert sympy.expand(to_sympy(p - q) - (to_sympy(p) - to_sympy(q))) == 0


@given(coeffs, st.integers(-5, 5))
def test_shift(a, k):
    p = IntPolynomial(tuple(a))
    assert sympy.expand(to_sympy(p.shift(k)) - to_sympy(p).subs(n, n + k)) == 0


@given(coeffs)
def test_format_parse_round_trip(a):
    p = IntPolynomial(tuple(a))
    assert IntPolynomial.parse(p.format()) == p


@given(coeffs)
def test_integer_roots_match_sympy(a):
    p = IntPolynomial(tuple(a))
    if p.is_zero():
        return
    expected = sorted(int(r) for r in sympy.roots(sympy.Poly(to_sympy(p), n), filter="Z"))
    assert sorted(p.integer_roots()) == expected


def test_trailing_zeros_trimmed():
    assert IntPolynomial((1, 2, 0, 0)).coeffs == (1, 2)
    assert IntPolynomial((0, 0)).is_zero()


@pytest.mark.parametrize(
    "text, expected",
    [
        ("n(n+2)^2", (0, 4, 4, 1)),
        ("(2n+1)(3n(n+1)+1)", (1, 5, 9, 6)),
        ("-(n+3)n^2", (0, 0, -3, -1)),
        ("2+n(2+n)(4+3n)", (2, 8, 10, 3)),
        ("n^3+(n+1)^3", (1, 3, 3, 2)),
        ("-2n^3(n+2)", (0, 0, 0, -4, -2)),
    ],
)
def test_parse_juxtaposition(text, expected):
    assert IntPolynomial.parse(text).coeffs == expected


def test_only_known_functions_are_calls():
    node = _expr.parse("sqrt(2)*n(n+1)")
    assert "sqrt" in _expr.unparse(node)
    with pytest.raises(ValueError):
        IntPolynomial.parse("sqrt(n)")


def test_natural_roots():
    assert IntPolynomial.parse("n^2 - 4").natural_roots() == [2]
    assert IntPolynomial.parse("n + 4").natural_roots() == []
