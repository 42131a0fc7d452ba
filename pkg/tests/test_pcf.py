from decimal import Decimal
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcfmatch import numerics
from pcfmatch.lhs import LhsExpression
from pcfmatch.pcf import (
    BoundUnavailableError,
    DegenerateConvergentError,
    NotApplicableError,
    PcfDefinition,
    accelerate_with_tail,
    error_bound_leibniz,
    error_estimate_empirical,
    evaluate,
    evaluate_decimal,
    evaluate_to_precision,
    evaluate_with_intermediate_reduction,
    iter_convergents,
    richardson,
)
from pcfmatch.poly import IntPolynomial
from oracles import mp_constant, mp_limit, poly_at, top_down

small = st.lists(st.integers(-4, 4), min_size=1, max_size=3)


def build(a0, alpha, beta):
    try:
        return PcfDefinition.simple(IntPolynomial(tuple(alpha)), IntPolynomial(tuple(beta)), a0)
    except ValueError:
        return None


@given(st.integers(-3, 3), small, small, st.integers(1, 25))
def test_evaluate_matches_top_down(a0, alpha, beta, depth):
    pcf = build(a0, alpha, beta)
    if pcf is None:
        return
    expected = None
    try:
        expected = top_down(a0, lambda n: poly_at(alpha, n), lambda n: poly_at(beta, n), depth)
    except ZeroDivisionError:
        pass
    try:
        got = evaluate(pcf, depth).fraction()
    except DegenerateConvergentError:
        got = None
    if expected is not None and got is not None:
        assert got == expected


@given(st.integers(-3, 3), small, small, st.integers(1, 200), st.integers(1, 50))
def test_reduction_preserves_value(a0, alpha, beta, depth, every):
    pcf = build(a0, alpha, beta)
    if pcf is None:
        return
    try:
        plain = evaluate(pcf, depth).fraction()
    except DegenerateConvergentError:
        return
    assert evaluate_with_intermediate_reduction(pcf, depth, every).fraction() == plain


def test_parse_format_round_trip():
    pcf = PcfDefinition.parse("a0=3; a[n] = n+3 | 2n; b[n] = -n | n^2+1")
    assert pcf.period == 2
    assert PcfDefinition.parse(pcf.format()) == pcf
    assert pcf.a(3) == 6 and pcf.b(2) == -2


def test_a0_defaults_to_alpha_at_zero():
    assert PcfDefinition.parse("a[n]=2n+1; b[n]=n^2").a0 == 1


def test_rational_pcf_rejected():
    with pytest.raises(ValueError, match="vanishes"):
        PcfDefinition.parse("a[n]=n; b[n]=n-3")
    with pytest.raises(ValueError):
        PcfDefinition.parse("a[n]=n; b[n]=0")


def test_degenerate_convergent():
    pcf = PcfDefinition.parse("a0=0; a[n]=1; b[n]=-2")  # q: 1, 1, -1, -3, -1 ... q_2 = 1 - 2 = -1
    qs = [q for _, _, q in iter_convergents(pcf, 6)]
    zero = [n for n, q in enumerate(qs) if q == 0]
    for n in zero:
        with pytest.raises(DegenerateConvergentError):
            evaluate(pcf, n)


def test_interlaced_matches_oracle():
    pcf = PcfDefinition.parse("a0=1; a[n]=n+1 | 2n+3; b[n]=n^2 | -n-7")
    a = lambda n: (n + 1) if n % 2 == 0 else (2 * n + 3)
    b = lambda n: n * n if n % 2 == 0 else (-n - 7)
    assert evaluate(pcf, 17).fraction() == top_down(1, a, b, 17)


def test_evaluate_to_precision_e():
    pcf = PcfDefinition.parse("a0=3; a[n]=n+3; b[n]=-n")
    res = evaluate_to_precision(pcf, 200)
    assert res.reached and res.method == "exact"
    assert numerics.decimal_digits_agreeing(res.value, numerics.constant_value("e", 220)) >= 200


def test_decimal_recurrence_matches_exact():
    pcf = PcfDefinition.parse("a[n]=2n+1; b[n]=n^2")
    got = evaluate_decimal(pcf, [10, 50, 300], 80)
    for depth, value in zip([10, 50, 300], got):
        exact = evaluate(pcf, depth).to_decimal(80)
        assert numerics.decimal_digits_agreeing(value, exact) >= 70


def test_richardson_on_polynomial_row():
    # 1/zeta(3): polynomial convergence, error ~ 1/n^2
    pcf = PcfDefinition.parse("a0=1; a[n]=n^3+(n+1)^3; b[n]=-n^6")
    ex = richardson(pcf)
    ref = 1 / mpmath.zeta(3)
    assert abs(mpmath.mpf(str(ex.value)) - ref) < 1e-10
    plain = evaluate(pcf, ex.depth).to_decimal(30)
    # extrapolation is doing the work
    assert abs(mpmath.mpf(str(ex.value)) - ref) < abs(mpmath.mpf(str(plain)) - ref) / 100


def test_leibniz_bound_brackets_limit():
    pcf = PcfDefinition.parse("a[n]=2n+1; b[n]=n^2")  # 4/pi, positive tail
    bound = error_bound_leibniz(pcf, 30)
    err = abs(evaluate(pcf, 30).fraction() - evaluate(pcf, 3000).fraction())
    assert bound.rigorous and err <= bound.bound


def test_leibniz_unavailable_for_alternating_tail():
    pcf = PcfDefinition.parse("a0=3; a[n]=n+3; b[n]=-n")
    with pytest.raises(BoundUnavailableError):
        error_bound_leibniz(pcf, 20)
    est = error_estimate_empirical(pcf, 20)
    assert not est.rigorous and est.digits > 15


def test_tail_acceleration_gains_digits():
    pcf = PcfDefinition.parse("a[n]=2n+1; b[n]=n^2")
    ref = LhsExpression.parse("(4)/(x) @ pi").value(300)
    plain = numerics.log10_agreement(evaluate(pcf, 100).to_decimal(200), ref)
    acc = numerics.log10_agreement(accelerate_with_tail(pcf, 100, 200), ref)
    assert acc > plain + 1


def test_tail_acceleration_not_applicable():
    with pytest.raises(NotApplicableError):
        accelerate_with_tail(PcfDefinition.parse("a0=3; a[n]=n+3; b[n]=-n"), 50)


def test_mpmath_oracle_agrees_with_exact():
    pcf = PcfDefinition.parse("a0=1; a[n]=n(3n+7)+3; b[n]=-2n^3(n+2)")
    a = lambda n: n * (3 * n + 7) + 3
    b = lambda n: -2 * n**3 * (n + 2)
    ours = evaluate(pcf, 120).to_decimal(60)
    assert abs(mpmath.mpf(str(ours)) - mp_limit(1, a, b, 120)) < mpmath.mpf(10) ** -55
    target = 2 / (2 * mp_constant("catalan") - 1) - 2  # LHS 2/(2G-1) with a0 = 3 moved to 1
    assert abs(mp_limit(1, a, b, 600) - target) < 1e-50
