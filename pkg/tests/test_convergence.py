from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcfmatch import convergence as cv
from pcfmatch.pcf import PcfDefinition


def classify(text):
    return cv.classify(PcfDefinition.parse(text))


@pytest.mark.parametrize(
    "text, cls",
    [
        ("a0=3; a[n]=n+3; b[n]=-n", cv.SUPER_EXPONENTIAL),  # deg b < 2 deg a
        ("a[n]=2n+1; b[n]=n^2", cv.EXPONENTIAL),
        ("a0=1; a[n]=n^3+(n+1)^3; b[n]=-n^6", cv.SUB_EXPONENTIAL),  # c = -1/4 exactly
        ("a[n]=n; b[n]=n^3", cv.SUB_EXPONENTIAL),  # deg b > 2 deg a
        ("a[n]=n; b[n]=-n^2", cv.NO_CONVERGENCE),  # 1 + 4c < 0
        ("a[n]=1; b[n]=1", cv.EXPONENTIAL),
    ],
)
def test_classes(text, cls):
    assert classify(text).cls == cls


def test_predicted_rate_4_over_pi():
    # eigenvalues of x^2 = x + 1/4: ratio (1 - sqrt 2)/(1 + sqrt 2)
    expected = -mpmath.log10(abs((1 - mpmath.sqrt(2)) / (1 + mpmath.sqrt(2))))
    assert cv.predicted_rate(Fraction(1, 4)) == pytest.approx(float(expected), rel=1e-12)
    assert classify("a0=1; a[n]=1+2*n; b[n]=n^2").predicted_digits_per_term == pytest.approx(0.76555, abs=1e-4)


@given(st.fractions(min_value=Fraction(-1, 5), max_value=Fraction(20)).filter(lambda c: c != 0))
def test_predicted_rate_matches_eigen_oracle(c):
    roots = sorted(mpmath.polyroots([1, -1, -mpmath.mpf(c.numerator) / c.denominator], maxsteps=200, extraprec=200), key=abs)
    expected = -mpmath.log10(abs(roots[0] / roots[1]))
    assert cv.predicted_rate(c) == pytest.approx(float(expected), rel=1e-9, abs=1e-12)


def test_complex_regime():
    with pytest.raises(cv.ComplexRegimeError):
        cv.predicted_rate(Fraction(-1, 2))
    with pytest.raises(cv.ComplexRegimeError):
        cv.eigen_tail(1, -1)


def test_interlaced_period_two():
    # alternating slots; classification uses the product of the slot matrices
    rep = classify("a0=1; a[n]=2n+1 | 2n+1; b[n]=n^2 | n^2")
    assert rep.cls == cv.EXPONENTIAL
    assert rep.predicted_digits_per_term == pytest.approx(cv.predicted_rate(Fraction(1, 4)), rel=1e-9)


def test_measured_rate_tracks_prediction():
    pcf = PcfDefinition.parse("a[n]=2n+1; b[n]=n^2")
    rep = cv.classify_and_measure(pcf, (50, 400), 2000)
    assert rep.measured_digits_per_term == pytest.approx(rep.predicted_digits_per_term, rel=0.01)


def test_agreement_series_is_increasing_for_super_exponential():
    xs, ys = cv.agreement_series(PcfDefinition.parse("a0=3; a[n]=n+3; b[n]=-n"), 5, 60)
    assert all(b > a for a, b in zip(ys, ys[1:]))


def test_eigen_tail_limit():
    pair = cv.eigen_tail(1, 1, 60)
    assert abs(mpmath.mpf(str(pair.limit)) - mpmath.phi) < mpmath.mpf(10) ** -58
    assert cv.eigen_tail(2, -1).boundary


def test_report_json():
    data = classify("a[n]=2n+1; b[n]=n^2").to_json()
    assert data["class"] == "exponential" and data["slot_limits"] == ["1/4"]


def test_classifier_concordance_on_db(db):
    for rec in db:
        assert cv.classify(rec.pcf).cls == rec.cls, rec.note
