"""Convergence classes, predicted and measured digits/term.

With c_n = b_n / (a_{n-1} a_n) the PCF behaves like the unit-denominator
fraction with partial numerators c_n.  When c_n tends to a finite nonzero c
the tail is governed by the matrix [[1, c], [1, 0]] whose eigenvalue ratio
sets the exponential rate; c_n -> 0 gives super-exponential convergence and
c_n -> infinity polynomial (sub-exponential) convergence.

Interlaced PCFs get one limit c_j per slot and the product of the slot
matrices over a period plays the same role.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction

from . import numerics
from .pcf import PcfDefinition, iter_convergents

SUPER_EXPONENTIAL = "super_exponential"
EXPONENTIAL = "exponential"
SUB_EXPONENTIAL = "sub_exponential"
NO_CONVERGENCE = "no_convergence_detected"
CLASSES = (SUPER_EXPONENTIAL, EXPONENTIAL, SUB_EXPONENTIAL, NO_CONVERGENCE)

# search pipelines only trust an exponential label above this measured rate
MIN_CONFIRMED_RATE = 0.01


class ClassificationUnavailableError(ValueError):
    pass


class MeasurementUnavailableError(ValueError):
    pass


class ComplexRegimeError(ValueError):
    pass


@dataclass
class ConvergenceReport:
    cls: str
    predicted_digits_per_term: float | None = None
    measured_digits_per_term: float | None = None
    window: tuple[int, int] | None = None
    determinant_condition_holds: bool = False
    slot_limits: list = field(default_factory=list)  # per slot: Fraction, "inf" or 0

    def to_json(self) -> dict:
        return {
            "class": self.cls,
            "predicted_digits_per_term": self.predicted_digits_per_term,
            "measured_digits_per_term": self.measured_digits_per_term,
            "window": list(self.window) if self.window else None,
            "determinant_condition_holds": self.determinant_condition_holds,
            "slot_limits": [str(c) for c in self.slot_limits],
        }


def slot_limits(pcf: PcfDefinition) -> list:
    """lim c_n along each residue class: a Fraction, or the string "inf"."""
    k = pcf.period
    out = []
    for j in range(k):
        a_prev, a_cur, b = pcf.alpha[(j - 1) % k], pcf.alpha[j], pcf.beta[j]
        if a_prev.is_zero() or a_cur.is_zero():
            raise ClassificationUnavailableError("an alpha slot is the zero polynomial")
        excess = b.degree - a_prev.degree - a_cur.degree
        if excess > 0:
            out.append("inf")
        elif excess < 0:
            out.append(Fraction(0))
        else:
            out.append(Fraction(b.leading, a_prev.leading * a_cur.leading))
    return out


def _period_matrix_eigen(cs: list[Fraction]) -> tuple[float, float]:
    """Trace and determinant of prod [[1, c_j], [1, 0]] (exact, as Fractions)."""
    m = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
    for c in cs:
        step = [[Fraction(1), c], [Fraction(1), Fraction(0)]]
        m = [
            [m[0][0] * step[0][0] + m[0][1] * step[1][0], m[0][0] * step[0][1] + m[0][1] * step[1][1]],
            [m[1][0] * step[0][0] + m[1][1] * step[1][0], m[1][0] * step[0][1] + m[1][1] * step[1][1]],
        ]
    trace = m[0][0] + m[1][1]
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return trace, det


def classify(pcf: PcfDefinition) -> ConvergenceReport:
    limits = slot_limits(pcf)
    k = pcf.period
    if any(c == "inf" for c in limits):
        return ConvergenceReport(SUB_EXPONENTIAL, slot_limits=limits)
    if all(c == 0 for c in limits):
        return ConvergenceReport(SUPER_EXPONENTIAL, determinant_condition_holds=True, slot_limits=limits)
    trace, det = _period_matrix_eigen(limits)
    disc = trace * trace - 4 * det
    if disc < 0:
        return ConvergenceReport(NO_CONVERGENCE, slot_limits=limits)
    if disc == 0:
        return ConvergenceReport(SUB_EXPONENTIAL, slot_limits=limits)
    if det == 0:
        # one slot matrix is singular: the error ratio per period is zero
        if trace == 0:
            return ConvergenceReport(NO_CONVERGENCE, slot_limits=limits)
        return ConvergenceReport(SUPER_EXPONENTIAL, determinant_condition_holds=True, slot_limits=limits)
    root = math.sqrt(float(disc))
    t = float(trace)
    mu_big = (t + math.copysign(root, t)) / 2 if t != 0 else root / 2
    mu_small = float(det) / mu_big
    ratio = abs(mu_small / mu_big)
    if ratio >= 1:
        return ConvergenceReport(NO_CONVERGENCE, slot_limits=limits)
    rate = -math.log10(ratio) / k
    return ConvergenceReport(EXPONENTIAL, predicted_digits_per_term=rate,
                             determinant_condition_holds=True, slot_limits=limits)


def predicted_rate(c: Fraction | float) -> float:
    """-log10|2c / (2c + 1 + sqrt(1 + 4c))| for the period-1 exponential case."""
    c = float(c)
    if 1 + 4 * c <= 0:
        raise ComplexRegimeError("1 + 4c must be positive")
    return -math.log10(abs(2 * c / (2 * c + 1 + math.sqrt(1 + 4 * c))))


def agreement_series(pcf: PcfDefinition, start: int, end: int, reference_depth: int | None = None):
    """Digits of agreement of eta_n with eta_R (R = 10*end by default), n in [start, end].

    Computed exactly: |eta_n - eta_R| = |p_n q_R - p_R q_n| / |q_n q_R|.
    """
    ref_depth = reference_depth or 10 * end
    if ref_depth <= end:
        raise ValueError("reference depth must exceed the window end")
    pairs = {}
    p_ref = q_ref = None
    for n, p, q in iter_convergents(pcf, ref_depth):
        if start <= n <= end:
            pairs[n] = (p, q)
        if n == ref_depth:
            p_ref, q_ref = p, q
    if q_ref == 0:
        raise MeasurementUnavailableError("reference convergent is degenerate")
    scale = max(abs(p_ref), abs(q_ref))  # |eta_R| >= 1 iff |p| >= |q|
    xs, ys = [], []
    for n in range(start, end + 1):
        p, q = pairs[n]
        if q == 0:
            continue
        num = p * q_ref - p_ref * q
        if num == 0:
            continue  # agreement beyond the reference precision
        # |eta_n - eta_R| / max(|eta_R|, 1)
        d = -(numerics.log10_abs_ratio(abs(num), abs(q * q_ref))
              - numerics.log10_abs_ratio(scale, abs(q_ref)))
        xs.append(n)
        ys.append(d)
    return xs, ys


def measure_rate(pcf: PcfDefinition, window: tuple[int, int] = (10, 1000),
                 reference_depth: int | None = None) -> float:
    """Least-squares slope of digits-of-agreement against term index."""
    start, end = window
    if end <= start:
        raise ValueError("empty window")
    xs, ys = agreement_series(pcf, start, end, reference_depth)
    if len(xs) < 2:
        raise MeasurementUnavailableError("not enough distinct convergents in the window")
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / sxx


def classify_and_measure(pcf: PcfDefinition, window: tuple[int, int] = (10, 1000),
                         reference_depth: int | None = None) -> ConvergenceReport:
    report = classify(pcf)
    try:
        report.measured_digits_per_term = measure_rate(pcf, window, reference_depth)
        report.window = window
    except (MeasurementUnavailableError, ZeroDivisionError):
        pass
    return report


@dataclass(frozen=True)
class EigenPair:
    plus: Decimal  # larger magnitude
    minus: Decimal
    boundary: bool = False  # double root (a^2 + 4b == 0)

    @property
    def limit(self) -> Decimal:
        """Value of the 1-periodic PCF x = a + b/(a + b/(...)) (the dominant root)."""
        return self.plus


def eigen_tail(a, b, digits: int = 50) -> EigenPair:
    """Roots of lambda^2 = a*lambda + b, ordered so |plus| >= |minus|."""
    a, b = Fraction(a), Fraction(b)
    disc = a * a + 4 * b
    if disc < 0:
        raise ComplexRegimeError("a^2 + 4b < 0: complex eigenvalues")
    with localcontext() as ctx:
        ctx.prec = digits + numerics.GUARD_DIGITS
        da = Decimal(a.numerator) / Decimal(a.denominator)
        root = (Decimal(disc.numerator) / Decimal(disc.denominator)).sqrt()
        sign = 1 if a >= 0 else -1
        plus = (da + sign * root) / 2
        minus = (da - sign * root) / 2
    return EigenPair(numerics.round_to(plus, digits), numerics.round_to(minus, digits), disc == 0)
