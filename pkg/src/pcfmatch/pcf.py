"""Polynomial continued fractions: definition, exact evaluation, error control.

A PCF is ``a0 + b1/(a1 + b2/(a2 + ...))`` with ``a_n = alpha[n % k](n)`` and
``b_n = beta[n % k](n)`` for ``n >= 1``.  Convergents come from the integer
recurrence ``p_{n+1} = a_{n+1} p_n + b_{n+1} p_{n-1}`` seeded with
``p_{-1}=1, p_0=a0, q_{-1}=0, q_0=1``.

Text form (see README for the grammar)::

    a0=1; a[n] = 2*n + 1; b[n] = n^2
    a0=6; a[n] = 6 | 2; b[n] = -n^2 - 2*n | -n^2 - 3*n - 2
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Iterator, Sequence

from . import numerics
from .poly import IntPolynomial, polys_from

DEFAULT_REDUCE_EVERY = 64
DEFAULT_MAX_DEPTH = 10**6
DEPTH_SAFETY = 1.5
# sign-regularity scan for the Leibniz bound gives up past this many terms
LEIBNIZ_SCAN_LIMIT = 100_000


class DegenerateConvergentError(ZeroDivisionError):
    """q_n vanished at the requested depth."""


class BoundUnavailableError(ValueError):
    pass


class NotApplicableError(ValueError):
    pass


@dataclass(frozen=True)
class PcfDefinition:
    alpha: tuple[IntPolynomial, ...]
    beta: tuple[IntPolynomial, ...]
    a0: int | None = None

    def __post_init__(self):
        alpha = polys_from(self.alpha)
        beta = polys_from(self.beta)
        if not alpha or len(alpha) != len(beta):
            raise ValueError("alpha and beta must be nonempty and of equal length")
        k = len(alpha)
        for j, b in enumerate(beta):
            if b.is_zero():
                raise ValueError(f"beta slot {j} is the zero polynomial")
            roots = b.natural_roots(k, j)
            if roots:
                raise ValueError(f"beta slot {j} vanishes at natural n={roots[0]} (PCF is rational)")
        a0 = alpha[0](0) if self.a0 is None else int(self.a0)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "a0", a0)

    @classmethod
    def simple(cls, alpha, beta, a0: int | None = None) -> "PcfDefinition":
        """Period-1 PCF from one alpha and one beta (polynomial, text, or coefficients)."""
        return cls((alpha,), (beta,), a0)

    @property
    def period(self) -> int:
        return len(self.alpha)

    def a(self, n: int) -> int:
        return self.alpha[n % self.period](n)

    def b(self, n: int) -> int:
        return self.beta[n % self.period](n)

    def degrees(self) -> tuple[int, int]:
        """(max deg alpha, max deg beta) over the slots."""
        return max(p.degree for p in self.alpha), max(p.degree for p in self.beta)

    # -- text form -------------------------------------------------------
    def format(self) -> str:
        a = " | ".join(p.format() for p in self.alpha)
        b = " | ".join(p.format() for p in self.beta)
        return f"a0={self.a0}; a[n] = {a}; b[n] = {b}"

    __str__ = format

    @classmethod
    def parse(cls, text: str) -> "PcfDefinition":
        a0 = None
        alpha = beta = None
        for part in (s.strip() for s in text.split(";")):
            if not part:
                continue
            head, eq, body = part.partition("=")
            key = head.replace(" ", "") if eq else ""
            if key in ("a[n]", "a_n", "an"):
                alpha = tuple(IntPolynomial.parse(s) for s in body.split("|"))
            elif key in ("b[n]", "b_n", "bn"):
                beta = tuple(IntPolynomial.parse(s) for s in body.split("|"))
            elif key in ("a0", "a[0]", "a_0"):
                a0 = int(body.strip())
            elif not eq:
                a0 = int(part)
            else:
                raise ValueError(f"unrecognised PCF clause {part!r}")
        if alpha is None or beta is None:
            raise ValueError(f"PCF text needs both a[n] and b[n]: {text!r}")
        return cls(alpha, beta, a0)


@dataclass(frozen=True)
class Approximant:
    p: int
    q: int
    depth: int

    def fraction(self) -> Fraction:
        if self.q == 0:
            raise DegenerateConvergentError(f"q_{self.depth} = 0")
        return Fraction(self.p, self.q)

    def reduced(self) -> "Approximant":
        g = math.gcd(self.p, self.q) or 1
        if self.q < 0:
            g = -g
        return Approximant(self.p // g, self.q // g, self.depth)

    def to_decimal(self, digits: int) -> Decimal:
        if self.q == 0:
            raise DegenerateConvergentError(f"q_{self.depth} = 0")
        return numerics.int_ratio_to_decimal(self.p, self.q, digits)


@dataclass(frozen=True)
class ErrorBound:
    """``digits`` is -log10 of the bound: |eta - eta_n| <= 10**(-digits).

    ``bound`` holds the exact rational bound when one was computed.
    ``rigorous`` is False for the successive-gap estimate.
    """

    digits: float
    bound: Fraction | None = None
    rigorous: bool = True

    @property
    def log10_bound(self) -> float:
        return self.digits


def iter_convergents(pcf: PcfDefinition, depth: int) -> Iterator[tuple[int, int, int]]:
    """Yield ``(n, p_n, q_n)`` for n = 0..depth (unreduced, exact)."""
    p_prev, p = 1, pcf.a0
    q_prev, q = 0, 1
    yield 0, p, q
    alpha, beta, k = pcf.alpha, pcf.beta, pcf.period
    for n in range(1, depth + 1):
        a = alpha[n % k](n)
        b = beta[n % k](n)
        p_prev, p = p, a * p + b * p_prev
        q_prev, q = q, a * q + b * q_prev
        yield n, p, q


def _run(pcf: PcfDefinition, depth: int, reduce_every: int = 0):
    """Exact recurrence; returns the last two (p, q) pairs."""
    alpha, beta, k = pcf.alpha, pcf.beta, pcf.period
    p_prev, p = 1, pcf.a0
    q_prev, q = 0, 1
    for n in range(1, depth + 1):
        a = alpha[n % k](n)
        b = beta[n % k](n)
        p_prev, p = p, a * p + b * p_prev
        q_prev, q = q, a * q + b * q_prev
        if reduce_every and n % reduce_every == 0:
            g = math.gcd(math.gcd(p, q), math.gcd(p_prev, q_prev))
            if g > 1:
                p, q, p_prev, q_prev = p // g, q // g, p_prev // g, q_prev // g
    return p_prev, q_prev, p, q


def evaluate(pcf: PcfDefinition, depth: int) -> Approximant:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    _, _, p, q = _run(pcf, depth)
    if q == 0:
        raise DegenerateConvergentError(f"q_{depth} = 0; retry at depth {depth - 1} or {depth + 1}")
    return Approximant(p, q, depth)


def evaluate_with_intermediate_reduction(
    pcf: PcfDefinition, depth: int, reduce_every: int = DEFAULT_REDUCE_EVERY
) -> Approximant:
    """Same rational as :func:`evaluate`; both consecutive pairs are divided by
    their joint gcd every ``reduce_every`` steps, which the recurrence tolerates
    since it is linear."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if reduce_every < 1:
        raise ValueError("reduce_every must be positive")
    _, _, p, q = _run(pcf, depth, reduce_every)
    if q == 0:
        raise DegenerateConvergentError(f"q_{depth} = 0")
    return Approximant(p, q, depth)


# -- error control ---------------------------------------------------------


def _eventual_sign_start(pcf: PcfDefinition) -> int:
    """Index past which every slot polynomial has the sign of its leading term."""
    bound = 0
    for p in pcf.alpha + pcf.beta:
        bound = max(bound, p.root_bound())
    return bound + pcf.period + 1


def _tail_is_positive(pcf: PcfDefinition, start: int) -> bool:
    """True iff c_m = b_m / (a_{m-1} a_m) > 0 for every m >= start."""
    k = pcf.period
    for j in range(k):
        lead = pcf.beta[j].leading * pcf.alpha[j].leading * pcf.alpha[(j - 1) % k].leading
        if lead <= 0:
            return False
    stop = _eventual_sign_start(pcf)
    if stop - start > LEIBNIZ_SCAN_LIMIT:
        raise BoundUnavailableError("sign-regularity scan window exceeded")
    a_prev = pcf.a(start - 1) if start >= 1 else None
    for m in range(max(start, 1), stop + 1):
        a_m = pcf.a(m)
        if a_prev is None:
            a_prev = pcf.a(m - 1)
        if pcf.b(m) * a_prev * a_m <= 0:
            return False
        a_prev = a_m
    return True


def error_bound_leibniz(pcf: PcfDefinition, depth: int) -> ErrorBound:
    """Rigorous |eta - eta_n| <= |eta_{n+1} - eta_n| = |prod b_i| / |q_{n+1} q_n|.

    Valid when the tail past ``depth`` is a positive continued fraction after
    the equivalence transform to unit denominators (c_m > 0 for m >= n+2) and
    q_n, q_{n+1}/a_{n+1} share a sign, so eta is bracketed by eta_n and
    eta_{n+1}.  Anything else raises :class:`BoundUnavailableError`.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not _tail_is_positive(pcf, depth + 2):
        raise BoundUnavailableError("partial quotients are not eventually sign-regular")
    _, q_n, _, q_next = _run(pcf, depth + 1)
    a_next = pcf.a(depth + 1)
    if q_n == 0 or q_next == 0 or q_n * q_next * a_next <= 0:
        raise BoundUnavailableError(f"convergents at depth {depth} do not bracket the limit")
    prod_b = 1
    for i in range(1, depth + 2):
        prod_b *= pcf.b(i)
    bound = Fraction(abs(prod_b), abs(q_n * q_next))
    digits = -numerics.log10_abs_ratio(bound.numerator, bound.denominator)
    return ErrorBound(digits, bound, rigorous=True)


def error_estimate_empirical(pcf: PcfDefinition, depth: int) -> ErrorBound:
    """Heuristic accuracy from the last gap |eta_n - eta_{n-1}| (not rigorous)."""
    if depth < 2:
        raise ValueError("depth must be >= 2")
    p_prev, q_prev, p, q = _run(pcf, depth)
    if q == 0 or q_prev == 0:
        raise DegenerateConvergentError(f"zero denominator near depth {depth}")
    gap = Fraction(p * q_prev - p_prev * q, q * q_prev)
    if gap == 0:
        return ErrorBound(math.inf, Fraction(0), rigorous=False)
    digits = -numerics.log10_abs_ratio(abs(gap.numerator), gap.denominator)
    return ErrorBound(digits, abs(gap), rigorous=False)


def gap_digits(p_prev: int, q_prev: int, p: int, q: int) -> float:
    """-log10|p/q - p_prev/q_prev| without building the Fraction."""
    num = p * q_prev - p_prev * q
    if num == 0:
        return math.inf
    return -numerics.log10_abs_ratio(abs(num), abs(q * q_prev))


# -- tail acceleration -----------------------------------------------------


def limiting_c(pcf: PcfDefinition) -> Fraction | None:
    """c = beta_lead / alpha_lead^2 for a period-1 PCF with d_b = 2 d_a, else None."""
    if pcf.period != 1:
        return None
    a, b = pcf.alpha[0], pcf.beta[0]
    if a.degree < 0 or b.degree != 2 * a.degree:
        return None
    return Fraction(b.leading, a.leading**2)


def accelerate_with_tail(pcf: PcfDefinition, depth: int, digits: int = 60) -> Decimal:
    """Close the recurrence with the 1-periodic tail estimate a_n * lambda_+(c).

    In unit-denominator form the tail behaves like ``1 + c/(1 + c/(...))`` whose
    value is lambda_+ = (1 + sqrt(1 + 4c)) / 2, so the n-th full tail
    ``a_n + b_{n+1}/(a_{n+1} + ...)`` is replaced by ``a_n * lambda_+``.
    """
    c = limiting_c(pcf)
    if c is None or 1 + 4 * c <= 0:
        raise NotApplicableError("tail acceleration needs a 1-periodic exponential PCF")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    p_prev, q_prev, p, q = _run(pcf, depth - 1)
    a_n, b_n = pcf.a(depth), pcf.b(depth)
    work = digits + numerics.GUARD_DIGITS
    with localcontext() as ctx:
        # p, q can be huge; ratios below are formed at working precision
        ctx.prec = work
        lam = (1 + (1 + 4 * Decimal(c.numerator) / Decimal(c.denominator)).sqrt()) / 2
        tau = a_n * lam
        scale = max(abs(q), abs(q_prev), 1)
        # divide through by q to keep magnitudes in range
        num = tau * _ratio(p, scale, work) + b_n * _ratio(p_prev, scale, work)
        den = tau * _ratio(q, scale, work) + b_n * _ratio(q_prev, scale, work)
        if den == 0:
            raise DegenerateConvergentError("accelerated denominator vanished")
        value = num / den
    return numerics.round_to(value, digits)


def _ratio(x: int, scale: int, digits: int) -> Decimal:
    return numerics.int_ratio_to_decimal(x, scale, digits)


# -- decimal-recurrence evaluation and extrapolation ------------------------


def evaluate_decimal(pcf: PcfDefinition, depths: Sequence[int], digits: int) -> list[Decimal]:
    """Convergents at the requested depths from a rescaled Decimal recurrence.

    Much cheaper than exact integers for very deep sub-exponential runs; the
    forward recurrence keeps roughly ``digits - log10(depth)`` digits.
    """
    wanted = sorted(set(depths))
    out: dict[int, Decimal] = {}
    alpha, beta, k = pcf.alpha, pcf.beta, pcf.period
    big = Decimal(10) ** 50
    with localcontext() as ctx:
        ctx.prec = digits
        p_prev, p = Decimal(1), Decimal(pcf.a0)
        q_prev, q = Decimal(0), Decimal(1)
        i = 0
        if wanted and wanted[0] == 0:
            out[0] = p
            i = 1
        n = 0
        last = wanted[-1] if wanted else 0
        while n < last:
            n += 1
            a = alpha[n % k](n)
            b = beta[n % k](n)
            p_prev, p = p, a * p + b * p_prev
            q_prev, q = q, a * q + b * q_prev
            s = abs(q)
            if s > big:
                p, q, p_prev, q_prev = p / s, q / s, p_prev / s, q_prev / s
            if n == wanted[i]:
                if q == 0:
                    raise DegenerateConvergentError(f"q_{n} = 0")
                out[n] = p / q
                i += 1
    return [out[d] for d in depths]


@dataclass(frozen=True)
class Extrapolation:
    value: Decimal
    digits: float  # estimated accuracy, from the last two extrapolants
    depth: int


def richardson(
    pcf: PcfDefinition, base: int = 10, levels: int = 12, digits: int = 80
) -> Extrapolation:
    """Polynomial extrapolation in h = 1/n to h = 0 over depths base * 2**i.

    Suited to PCFs whose error expands in powers of 1/n (the polynomial
    convergence case).  ``base`` is rounded up to a multiple of the period so
    every sample ends on the same interlace slot.
    """
    k = pcf.period
    base = -(-base // k) * k
    ns = [base * 2**i for i in range(levels)]
    vals = evaluate_decimal(pcf, ns, digits)
    with localcontext() as ctx:
        ctx.prec = digits
        hs = [Decimal(1) / n for n in ns]
        table = list(vals)
        prev_best = table[-1]
        for j in range(1, levels):
            # before the last stage table[-1] extrapolates samples 1..levels-1
            prev_best = table[-1]
            for i in range(levels - 1, j - 1, -1):
                table[i] = (hs[i - j] * table[i] - hs[i] * table[i - 1]) / (hs[i - j] - hs[i])
        best = table[-1]
        diff = abs(best - prev_best)
        scale = max(abs(best), Decimal(1))
        est = math.inf if diff == 0 else float(-(diff / scale).log10())
    return Extrapolation(best, min(est, digits - 10), ns[-1])


@dataclass(frozen=True)
class PrecisionResult:
    value: Decimal
    digits: float  # achieved (estimated) digits
    depth: int
    method: str  # "exact" or "richardson"
    reached: bool  # False when the target could not be met within max_depth


def depth_for_digits(rate: float, digits: int, offset: int = 10) -> int:
    """Depth predicted to give ``digits`` digits at ``rate`` digits/term, with safety."""
    return int(math.ceil(DEPTH_SAFETY * digits / rate)) + offset


def evaluate_to_precision(
    pcf: PcfDefinition,
    digits: int,
    max_depth: int = DEFAULT_MAX_DEPTH,
    sub_exponential_digits: int = 10,
) -> PrecisionResult:
    """Evaluate to ``digits`` digits, picking depth from the convergence class.

    Exponential PCFs start from the predicted depth, super-exponential from a
    small depth; both are checked against the successive-convergent gap and
    doubled on shortfall.  Polynomially converging PCFs are extrapolated and
    report what they achieve, targeting ``sub_exponential_digits``.
    """
    from . import convergence  # local import: convergence depends on this module

    report = convergence.classify(pcf)
    cls = report.cls
    if cls in (convergence.SUB_EXPONENTIAL, convergence.NO_CONVERGENCE):
        ex = richardson(pcf, digits=max(80, digits + 30))
        achieved = min(ex.digits, digits)
        value = numerics.round_to(ex.value, digits + numerics.GUARD_DIGITS)
        reached = ex.digits >= min(digits, sub_exponential_digits)
        return PrecisionResult(value, achieved, ex.depth, "richardson", reached)
    if cls == convergence.EXPONENTIAL and report.predicted_digits_per_term:
        depth = depth_for_digits(report.predicted_digits_per_term, digits)
    else:
        depth = 16
    need = digits + 2
    while True:
        depth = min(depth, max_depth)
        p_prev, q_prev, p, q = _run(pcf, depth, DEFAULT_REDUCE_EVERY)
        if q != 0 and q_prev != 0:
            got = gap_digits(p_prev, q_prev, p, q)
            if got >= need or depth >= max_depth:
                value = numerics.int_ratio_to_decimal(p, q, digits + numerics.GUARD_DIGITS)
                return PrecisionResult(value, min(got, float(digits + numerics.GUARD_DIGITS)),
                                       depth, "exact", got >= need)
        elif depth >= max_depth:
            raise DegenerateConvergentError("zero denominator at max depth")
        depth *= 2
