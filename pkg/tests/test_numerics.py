from decimal import Decimal

import mpmath
import pytest

from pcfmatch import numerics
from oracles import mp_constant


@pytest.mark.parametrize("name", ["e", "pi", "zeta3", "catalan", "phi", "pi_squared"])
def test_constants_match_mpmath(name):
    ours = numerics.constant_value(name, 1000)
    with mpmath.workdps(1020):
        ref = mp_constant(name, 1010)
        assert abs(mpmath.mpf(str(ours)) - ref) < mpmath.mpf(10) ** -990 * max(1, abs(ref))


def test_aliases_resolve():
    assert numerics.canonical_name("G") == "catalan"
    assert numerics.canonical_name("zeta(3)") == "zeta3"
    assert numerics.canonical_name("pi^2") == "pi_squared"


def test_unknown_constant():
    with pytest.raises(numerics.UnknownConstantError):
        numerics.constant_value("feigenbaum", 10)


def test_precision_limits():
    with pytest.raises(numerics.PrecisionUnavailableError):
        numerics.constant_value("pi", 5000)
    with pytest.raises(numerics.PrecisionUnavailableError):
        numerics.constant_value("1.25", 10)
    assert numerics.constant_value("1.2500", 3) == Decimal("1.25")


def test_truncate_rounds_toward_zero():
    assert numerics.truncate(Decimal("3.14159"), 3) == Decimal("3.14")
    assert numerics.truncate(Decimal("-2.71828"), 4) == Decimal("-2.718")
    assert numerics.truncate(Decimal("0.000123456"), 2) == Decimal("0.00012")


def test_digits_agreeing():
    assert numerics.decimal_digits_agreeing(Decimal("3.14159"), Decimal("3.14160")) == 5
    assert numerics.decimal_digits_agreeing(Decimal("1"), Decimal("2")) == 0
    assert numerics.decimal_digits_agreeing(Decimal("1.000"), Decimal("1.000")) == 4
    assert numerics.log10_agreement(Decimal(1), Decimal(1)) == float("inf")


def test_log10_of_huge_ratio():
    p, q = 3**5000, 7**2000
    expected = 5000 * mpmath.log10(3) - 2000 * mpmath.log10(7)
    assert numerics.log10_abs_ratio(p, q) == pytest.approx(float(expected), rel=1e-12)


def test_digits_dir_override(tmp_path, monkeypatch):
    (tmp_path / "pi.txt").write_text("# pi 5\n3.1415\n")
    monkeypatch.setenv("PCFMATCH_DIGITS_DIR", str(tmp_path))
    assert numerics.digits_dir() == tmp_path
    monkeypatch.setattr(numerics, "_file_cache", {})
    assert numerics.constant_value("pi", 3) == Decimal("3.14")
    with pytest.raises(numerics.PrecisionUnavailableError):
        numerics.constant_value("pi", 8)
