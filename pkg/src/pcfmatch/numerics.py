"""Decimal arithmetic helpers and the fundamental-constant provider.

Integers are plain Python ``int`` (exact, arbitrary length).  Real values are
``decimal.Decimal``; every function that produces one takes the number of
significant digits explicitly and computes under a local context, so the
caller's global decimal context is never consulted.

Constant values come from digit files shipped in ``data/constants`` (one
``# <name> <digit-count>`` header line followed by ``d.ddd...``).  Derived
constants (``phi``, ``pi_squared``) are computed from those with 10 guard
digits.  Set ``PCFMATCH_DIGITS_DIR`` to read digit files from elsewhere.
"""
from __future__ import annotations

import math
import os
import pathlib
import threading
from dataclasses import dataclass
from decimal import ROUND_DOWN, Decimal, localcontext
from typing import Callable

DEFAULT_MAX_DIGITS = 2100
GUARD_DIGITS = 10

_DATA_DIR = pathlib.Path(__file__).parent / "data" / "constants"


class UnknownConstantError(KeyError):
    pass


class PrecisionUnavailableError(ValueError):
    pass


def digits_dir() -> pathlib.Path:
    override = os.environ.get("PCFMATCH_DIGITS_DIR")
    return pathlib.Path(override) if override else _DATA_DIR


def significant_digits(x: Decimal) -> int:
    """Number of digits in the coefficient of ``x`` (its carried precision)."""
    if not x.is_finite():
        return 0
    return len(x.as_tuple().digits)


def truncate(x: Decimal, digits: int) -> Decimal:
    """Cut ``x`` to ``digits`` significant digits (round toward zero)."""
    if x.is_zero() or not x.is_finite():
        return x
    shift = x.adjusted() - digits + 1
    with localcontext() as ctx:
        ctx.prec = max(digits, significant_digits(x)) + 5
        return x.quantize(Decimal(1).scaleb(shift), rounding=ROUND_DOWN)


def round_to(x: Decimal, digits: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = digits
        return +x


def decimal_digits_agreeing(x: Decimal, y: Decimal) -> int:
    """floor(-log10(|x - y| / max(|x|, 1))), clamped at 0.

    Identical inputs return the precision carried by ``x``.
    """
    x, y = Decimal(x), Decimal(y)
    if x == y:
        return significant_digits(x)
    with localcontext() as ctx:
        ctx.prec = max(significant_digits(x), significant_digits(y), 20) + 5
        diff = abs(x - y)
        scale = max(abs(x), Decimal(1))
        ctx.prec = 30
        ratio = diff / scale
        value = -ratio.log10()
    return max(0, math.floor(value))


def log10_agreement(x: Decimal, y: Decimal) -> float:
    """Unfloored -log10(|x - y| / max(|x|, 1)); ``inf`` when equal."""
    if x == y:
        return math.inf
    with localcontext() as ctx:
        ctx.prec = max(significant_digits(x), significant_digits(y), 20) + 5
        diff = abs(x - y)
        scale = max(abs(x), Decimal(1))
        ctx.prec = 30
        return float(-(diff / scale).log10())


def int_ratio_to_decimal(p: int, q: int, digits: int) -> Decimal:
    """Exact rational p/q rounded to ``digits`` significant digits."""
    if q == 0:
        raise ZeroDivisionError("zero denominator")
    with localcontext() as ctx:
        ctx.prec = digits
        return Decimal(p) / Decimal(q)


def log10_abs_ratio(p: int, q: int) -> float:
    """log10(|p / q|) for arbitrarily large integers, without overflow."""
    if p == 0:
        return -math.inf
    return _log10_int(abs(p)) - _log10_int(abs(q))


def _log10_int(n: int) -> float:
    bits = n.bit_length()
    if bits < 1000:
        return math.log10(n)
    shift = bits - 64
    return math.log10(n >> shift) + shift * math.log10(2)


# -- constants -------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    name: str
    max_digits: int
    compute: Callable[[int], Decimal]
    aliases: tuple[str, ...] = ()


_file_cache: dict[str, tuple[int, Decimal]] = {}
_file_lock = threading.Lock()


def _read_digit_file(name: str) -> tuple[int, Decimal]:
    with _file_lock:
        if name not in _file_cache:
            path = digits_dir() / f"{name}.txt"
            if not path.exists():
                raise PrecisionUnavailableError(f"no digit file for {name!r} at {path}")
            header, body = path.read_text().split("\n", 1)
            parts = header.lstrip("#").split()
            if len(parts) != 2 or parts[0] != name:
                raise ValueError(f"malformed digit file header in {path}: {header!r}")
            value = Decimal(body.strip())
            _file_cache[name] = (significant_digits(value), value)
        return _file_cache[name]


def _from_file(name: str) -> Callable[[int], Decimal]:
    def compute(digits: int) -> Decimal:
        available, value = _read_digit_file(name)
        if digits > available:
            raise PrecisionUnavailableError(
                f"{name}: {digits} digits requested, digit file holds {available}"
            )
        return truncate(value, digits)

    return compute


def _phi(digits: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = digits + GUARD_DIGITS
        return (1 + Decimal(5).sqrt()) / 2


def _pi_squared(digits: int) -> Decimal:
    pi = _from_file("pi")(digits + GUARD_DIGITS)
    with localcontext() as ctx:
        ctx.prec = digits + GUARD_DIGITS
        return pi * pi


_FILE_DIGITS = 2200

REGISTRY: dict[str, Constant] = {}


def register(constant: Constant) -> None:
    REGISTRY[constant.name] = constant
    for alias in constant.aliases:
        REGISTRY[alias] = constant


for _name, _aliases in (("e", ()), ("pi", ()), ("zeta3", ("zeta(3)",)), ("catalan", ("G",))):
    register(Constant(_name, _FILE_DIGITS, _from_file(_name), _aliases))
register(Constant("phi", 10**6, _phi))
register(Constant("pi_squared", _FILE_DIGITS - GUARD_DIGITS, _pi_squared, ("pi^2",)))


def canonical_name(constant_id: str) -> str:
    """Registry name for ``constant_id`` (aliases resolved, literals kept)."""
    if constant_id in REGISTRY:
        return REGISTRY[constant_id].name
    if _is_literal(constant_id):
        return constant_id
    raise UnknownConstantError(constant_id)


def _is_literal(text: str) -> bool:
    try:
        value = Decimal(text)
    except ArithmeticError:
        return False
    return value.is_finite()


def constant_value(constant_id: str, digits: int, max_digits: int = DEFAULT_MAX_DIGITS) -> Decimal:
    """The constant truncated to ``digits`` significant digits.

    ``constant_id`` is a registry name/alias or a decimal literal such as
    ``"1.2345678901"`` (whose own digit count bounds the precision).
    """
    if digits < 1:
        raise ValueError("digits must be positive")
    if digits > max_digits:
        raise PrecisionUnavailableError(f"{digits} digits exceeds the configured maximum {max_digits}")
    if constant_id in REGISTRY:
        constant = REGISTRY[constant_id]
        if digits > constant.max_digits:
            raise PrecisionUnavailableError(f"{constant.name}: at most {constant.max_digits} digits")
        return truncate(constant.compute(digits), digits)
    if _is_literal(constant_id):
        value = Decimal(constant_id)
        if digits > significant_digits(value):
            raise PrecisionUnavailableError(
                f"literal {constant_id!r} carries only {significant_digits(value)} digits"
            )
        return truncate(value, digits)
    raise UnknownConstantError(constant_id)


def available_digits(constant_id: str) -> int:
    if constant_id in REGISTRY:
        return REGISTRY[constant_id].max_digits
    if _is_literal(constant_id):
        return significant_digits(Decimal(constant_id))
    raise UnknownConstantError(constant_id)
