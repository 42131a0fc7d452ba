"""From hits to conjectures: exact verification, novelty, reports."""
from __future__ import annotations

import json
import math
import pathlib
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from functools import lru_cache
from typing import Iterable, Sequence

from . import __version__, numerics
from .convergence import (
    EXPONENTIAL,
    NO_CONVERGENCE,
    SUB_EXPONENTIAL,
    SUPER_EXPONENTIAL,
    ConvergenceReport,
    classify,
    eigen_tail,
)
from .lhs import FormulaLhs, LhsExpression, parse_formula
from .pcf import PcfDefinition, _run, evaluate_to_precision
from .poly import IntPolynomial

SCHEMA_VERSION = 1
PUBLICATION_DIGITS = 50
PUBLICATION_CONFIDENCE = -20.0
SUB_EXPONENTIAL_TARGET = 10

KNOWN, NEW = "known", "new_unproven"
MITM, DESCENT, MANUAL = "mitm", "descent_repel", "manual"
DRAFT, VERIFIED, REJECTED = "draft", "verified", "rejected"

DB_PATH = pathlib.Path(__file__).parent / "data" / "known_results.txt"


class DbIntegrityError(ValueError):
    pass


@dataclass
class Conjecture:
    lhs: LhsExpression | FormulaLhs
    pcf: PcfDefinition
    verified_digits: int = 0
    achieved_digits: int | None = None
    convergence: ConvergenceReport | None = None
    confidence: float | None = None
    novelty: str | None = None
    provenance: str = MANUAL
    metadata: dict = field(default_factory=dict)  # space hash, seed, template ...
    status: str = DRAFT
    flags: tuple[str, ...] = ()

    @property
    def publishable(self) -> bool:
        return (
            self.status == VERIFIED
            and self.verified_digits >= PUBLICATION_DIGITS
            and self.confidence is not None
            and self.confidence <= PUBLICATION_CONFIDENCE
        )

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs.format(),
            "lhs_kind": "rational" if isinstance(self.lhs, LhsExpression) else "formula",
            "pcf": self.pcf.format(),
            "verified_digits": self.verified_digits,
            "achieved_digits": self.achieved_digits,
            "convergence": self.convergence.to_json() if self.convergence else None,
            "confidence": self.confidence,
            "novelty": self.novelty,
            "provenance": self.provenance,
            "metadata": self.metadata,
            "status": self.status,
            "flags": list(self.flags),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Conjecture":
        lhs = LhsExpression.parse(data["lhs"]) if data.get("lhs_kind", "rational") == "rational" else FormulaLhs(data["lhs"])
        conv = data.get("convergence")
        report = None
        if conv:
            report = ConvergenceReport(
                conv["class"],
                conv.get("predicted_digits_per_term"),
                conv.get("measured_digits_per_term"),
                tuple(conv["window"]) if conv.get("window") else None,
                conv.get("determinant_condition_holds", False),
                list(conv.get("slot_limits", [])),
            )
        return cls(
            lhs,
            PcfDefinition.parse(data["pcf"]),
            data.get("verified_digits", 0),
            data.get("achieved_digits"),
            report,
            data.get("confidence"),
            data.get("novelty"),
            data.get("provenance", MANUAL),
            dict(data.get("metadata", {})),
            data.get("status", DRAFT),
            tuple(data.get("flags", ())),
        )


def _lhs_value(lhs, digits: int) -> Decimal:
    return lhs.value(digits)


def coincidence_confidence(space_size: int, matched_digits: float) -> float:
    if space_size < 1:
        raise ValueError("space size must be positive")
    return math.log10(space_size) - matched_digits


def verify(
    conj: Conjecture,
    target_digits: int = PUBLICATION_DIGITS,
    max_depth: int = 10**6,
    space_size: int | None = None,
    sub_exponential_digits: int = SUB_EXPONENTIAL_TARGET,
) -> Conjecture:
    """Evaluate both sides and accept iff they agree to ``target_digits``.

    Accepted exponential/super-exponential results are re-checked at twice the
    depth.  Polynomially converging PCFs are judged against the lower
    ``sub_exponential_digits`` target and carry the ``sub_exponential`` flag.
    """
    report = classify(conj.pcf)
    space_size = space_size or int(conj.metadata.get("space_size", 1))
    flags = set(conj.flags)
    try:
        res = evaluate_to_precision(conj.pcf, target_digits, max_depth, sub_exponential_digits)
        left = _lhs_value(conj.lhs, target_digits + numerics.GUARD_DIGITS)
    except (ArithmeticError, ValueError) as exc:
        flags.add(f"error:{type(exc).__name__}")
        return replace(conj, status=REJECTED, verified_digits=0, achieved_digits=0, convergence=report,
                       flags=tuple(sorted(flags)))
    agree = numerics.decimal_digits_agreeing(left, res.value)
    if res.method == "richardson":
        flags.add("sub_exponential")
        achieved = min(agree, int(math.floor(res.digits)))
        ok = achieved >= min(sub_exponential_digits, target_digits)
        digits = achieved if ok else 0
    else:
        achieved = agree
        ok = res.reached and agree >= target_digits
        if ok:
            # fresh evaluation at doubled depth
            p_prev, q_prev, p, q = _run(conj.pcf, 2 * res.depth, 64)
            again = numerics.int_ratio_to_decimal(p, q, target_digits + numerics.GUARD_DIGITS)
            ok = numerics.decimal_digits_agreeing(left, again) >= target_digits
        digits = target_digits if ok else 0
    return replace(
        conj,
        status=VERIFIED if ok else REJECTED,
        verified_digits=digits,
        achieved_digits=achieved,
        convergence=report,
        confidence=coincidence_confidence(space_size, digits) if ok else None,
        flags=tuple(sorted(flags)),
    )


# -- canonical keys and the known-results database --------------------------------


def _divisors_desc(n: int) -> list[int]:
    return sorted((d for d in range(1, n + 1) if n % d == 0), reverse=True) if n else [1]


def canonical_pair(lhs, pcf: PcfDefinition) -> tuple[str, str]:
    """Key of the identity ``lhs = a0 + tail``, stated as ``(lhs - a0)/r = tail/r``.

    a0 moves into the LHS, and the tail is divided by the largest r with
    r | alpha and r^2 | beta, signed so the leading alpha coefficient is positive.
    """
    g = 0
    for p in pcf.alpha:
        g = math.gcd(g, p.content())
    bcont = 0
    for p in pcf.beta:
        bcont = math.gcd(bcont, p.content())
    r = next(d for d in _divisors_desc(g) if bcont % (d * d) == 0)
    if pcf.alpha[0].leading < 0:
        r = -r
    alpha = tuple(IntPolynomial(tuple(c // r for c in p.coeffs)) for p in pcf.alpha)
    beta = tuple(IntPolynomial(tuple(c // (r * r) for c in p.coeffs)) for p in pcf.beta)
    tail = PcfDefinition(alpha, beta, 0)
    if isinstance(lhs, LhsExpression):
        num, den = lhs.canonical().numerator_denominator()
        key = LhsExpression(num - den * pcf.a0, den * r, lhs.constant).canonical().format()
    else:
        key = f"(({lhs.format().replace(' ', '')})-({pcf.a0}))/({r})"
    return key, tail.format()


@dataclass(frozen=True)
class KnownRecord:
    lhs: LhsExpression | FormulaLhs
    pcf: PcfDefinition
    cls: str
    rate: float | None
    source_novelty: str
    note: str

    @property
    def key(self) -> tuple[str, str]:
        return canonical_pair(self.lhs, self.pcf)


_CLASS_ALIASES = {
    "super": SUPER_EXPONENTIAL,
    "super_exponential": SUPER_EXPONENTIAL,
    "exponential": EXPONENTIAL,
    "polynomial": SUB_EXPONENTIAL,
    "sub_exponential": SUB_EXPONENTIAL,
}


def parse_record(line: str) -> KnownRecord:
    """``lhs :: pcf :: class :: rate :: novelty :: note``."""
    parts = [p.strip() for p in line.split("::")]
    if len(parts) != 6:
        raise ValueError(f"expected 6 '::'-separated fields: {line!r}")
    lhs_text, pcf_text, cls, rate, novelty, note = parts
    return KnownRecord(
        parse_formula(lhs_text),
        PcfDefinition.parse(pcf_text),
        _CLASS_ALIASES[cls],
        None if rate in ("-", "") else float(rate),
        novelty,
        note,
    )


class KnownResultsDb:
    def __init__(self, records: Sequence[KnownRecord]):
        self.records = list(records)
        self._by_key = {r.key: r for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @classmethod
    def load(cls, path=None, self_verify: bool = True, digits: int = PUBLICATION_DIGITS) -> "KnownResultsDb":
        """Parse the db file; with ``self_verify`` every record must check out."""
        path = pathlib.Path(path) if path else DB_PATH
        records = []
        for lineno, raw in enumerate(path.read_text().splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                records.append(parse_record(line))
            except (ValueError, KeyError) as exc:
                raise DbIntegrityError(f"{path}:{lineno}: {exc}") from exc
        db = cls(records)
        if self_verify:
            bad = [f"{r.note}: {r.lhs.format()} <> {r.pcf.format()}" for r in records if not record_verifies(r, digits)]
            if bad:
                raise DbIntegrityError("records fail self-verification: " + "; ".join(bad))
        return db

    def lookup(self, lhs, pcf) -> KnownRecord | None:
        return self._by_key.get(canonical_pair(lhs, pcf))


def record_verifies(record: KnownRecord, digits: int = PUBLICATION_DIGITS) -> bool:
    res = verify(Conjecture(record.lhs, record.pcf), digits)
    return res.status == VERIFIED


@lru_cache(maxsize=1)
def default_db() -> KnownResultsDb:
    return KnownResultsDb.load()


def novelty_check(conj: Conjecture, db: KnownResultsDb | None = None) -> str:
    db = db or default_db()
    return KNOWN if db.lookup(conj.lhs, conj.pcf) else NEW


# -- generators --------------------------------------------------------------------


def lucas(k: int) -> int:
    a, b = 2, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def lucas_family(k: int, digits: int = PUBLICATION_DIGITS) -> Conjecture:
    """phi^k = L_k - (-1)^k / (L_k - (-1)^k / (L_k - ...)), verified."""
    if k < 1:
        raise ValueError("k must be positive")
    lk = lucas(k)
    b = -((-1) ** k)
    pcf = PcfDefinition.simple(IntPolynomial((lk,)), IntPolynomial((b,)), lk)
    lhs = LhsExpression(IntPolynomial((0,) * k + (1,)), IntPolynomial((1,)), "phi")
    return verify(Conjecture(lhs, pcf, provenance=MANUAL, metadata={"family": "lucas", "k": k}), digits)


def lucas_limit(k: int, digits: int = PUBLICATION_DIGITS) -> Decimal:
    return eigen_tail(lucas(k), -((-1) ** k), digits).limit


# -- reports -----------------------------------------------------------------------

_TEX_CONSTANT = {"e": "e", "pi": r"\pi", "zeta3": r"\zeta(3)", "catalan": "G", "phi": r"\varphi", "pi_squared": r"\pi^2"}


def _tex_poly(text: str) -> str:
    text = text.replace("*", " ")
    return re.sub(r"\^(\d+)", r"^{\1}", text)


def _tex_lhs(lhs) -> str:
    if isinstance(lhs, LhsExpression):
        c = _TEX_CONSTANT.get(lhs.constant, lhs.constant)
        num, den = lhs.numerator_denominator()
        n = _tex_poly(num.format("x")).replace("x", c)
        d = _tex_poly(den.format("x")).replace("x", c)
        return n if d == "1" else rf"\frac{{{n}}}{{{d}}}"
    text = lhs.format().replace("*", " ")
    text = re.sub(r"\bpi\b", r"\\pi ", text)
    text = re.sub(r"\bacosh\b", r"\\operatorname{acosh}", text)
    return text


def _tex_fraction(pcf: PcfDefinition, terms: int = 4) -> str:
    out = r"\ddots"
    for n in range(terms, 0, -1):
        out = rf"{pcf.a(n)} + \cfrac{{{pcf.b(n + 1)}}}{{{out}}}"
    return rf"{pcf.a0} + \cfrac{{{pcf.b(1)}}}{{{out}}}"


def _tex_polys(pcf: PcfDefinition) -> str:
    a = r" \mid ".join(_tex_poly(p.format()) for p in pcf.alpha)
    b = r" \mid ".join(_tex_poly(p.format()) for p in pcf.beta)
    return rf"$a_n = {a},\ b_n = {b}$"


def _tex_rate(c: Conjecture) -> str:
    report = c.convergence or classify(c.pcf)
    if report.cls == SUB_EXPONENTIAL:
        return "polynomial"
    if report.cls == NO_CONVERGENCE:
        return "none"
    rate = report.measured_digits_per_term or report.predicted_digits_per_term
    star = " *" if report.cls == SUPER_EXPONENTIAL else ""
    return (f"{rate:.5g}" if rate else "-") + star


def emit_report(conjectures: Iterable[Conjecture], fmt: str = "json") -> str:
    conjectures = list(conjectures)
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "code_version": __version__,
            "conjectures": [c.to_json() for c in conjectures],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt != "latex":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        r"\documentclass{article}",
        r"\usepackage{amsmath}",
        r"\usepackage[margin=0.6in,landscape]{geometry}",
        r"\begin{document}",
        r"\begin{tabular}{|l|l|l|l|}",
        r"\hline",
        r"Novelty & Formula & Polynomials & Convergence [digits/term] \\",
        r"\hline",
    ]
    for c in conjectures:
        novelty = {KNOWN: "known", NEW: "new"}.get(c.novelty or "", "-")
        formula = rf"${_tex_lhs(c.lhs)} = {_tex_fraction(c.pcf)}$"
        lines.append(rf"{novelty} & {formula} & {_tex_polys(c.pcf)} & {_tex_rate(c)} \\")
        lines.append(r"\hline")
    lines += [r"\end{tabular}", r"\end{document}"]
    return "\n".join(lines) + "\n"
