"""Acceptance criteria, one test each.

Every test attaches a one-line detail via ``record_property("acceptance", ...)``
and the conftest hook prints a PASS/FAIL line per criterion after the run.
"""
import json
import math
import os
import random
import time
from decimal import Decimal, localcontext
from fractions import Fraction
from math import comb

import mpmath
import numpy as np
import pytest

from pcfmatch import cli, conjecture as cj, convergence, mitm, numerics
from pcfmatch.lhs import LhsExpression, LhsSpace, parse_formula
from pcfmatch.pcf import (
    BoundUnavailableError,
    DegenerateConvergentError,
    PcfDefinition,
    accelerate_with_tail,
    error_bound_leibniz,
    evaluate,
    evaluate_to_precision,
    limiting_c,
)
from pcfmatch.poly import IntPolynomial
from oracles import top_down

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def keys_of(conjectures, status=cj.VERIFIED, digits=50):
    out = set()
    for c in conjectures:
        if c.status == status and c.verified_digits >= digits:
            out.add(cj.canonical_pair(c.lhs, c.pcf))
    return out


def key(lhs, pcf):
    return cj.canonical_pair(parse_formula(lhs), PcfDefinition.parse(pcf))


def load_conjectures(path):
    with open(path) as fh:
        return [cj.Conjecture.from_json(c) for c in json.load(fh)["conjectures"]]


def db_row(db, note):
    return next(r for r in db if r.note.split(" (")[0] == note)


# 1 ----------------------------------------------------------------------------


def test_c01_regression_corpus_self_verifies(record_property):
    t0 = time.perf_counter()
    db = cj.KnownResultsDb.load(self_verify=False)
    results = [cj.verify(cj.Conjecture(r.lhs, r.pcf), 50) for r in db]
    elapsed = time.perf_counter() - t0
    bad = []
    for r, res in zip(db, results):
        need = 10 if r.cls == cj.SUB_EXPONENTIAL else 50
        if res.status != cj.VERIFIED or res.verified_digits < need:
            bad.append(r.note)
    record_property("acceptance", f"{len(db)} rows, {len(bad)} failures, {elapsed:.1f}s (limit 600s)")
    assert not bad and elapsed < 600


# 2 ----------------------------------------------------------------------------

E_REQUIRED = [
    ("e/(e-2)", "a[n] = n+4; b[n] = -n"),
    ("1/(e-2)", "a[n] = n+1; b[n] = n"),
    ("e/(e-1)", "a[n] = n+2; b[n] = -n"),
    ("1/(e-1)", "a[n] = n; b[n] = n"),
    ("e", "a0=3; a[n] = n+3; b[n] = -n"),
]


def test_c02_rediscover_e(record_property, tmp_path):
    # the required forms themselves must be identities
    for lhs, pcf in E_REQUIRED:
        assert cj.verify(cj.Conjecture(parse_formula(lhs), PcfDefinition.parse(pcf)), 50).status == cj.VERIFIED
    out = tmp_path / "e.json"
    t0 = time.perf_counter()
    code = run_cli("search", "--config", os.path.join(CONFIGS, "e_regression.toml"), "-o", out)
    elapsed = time.perf_counter() - t0
    found = keys_of(load_conjectures(out))
    missing = [lhs for lhs, pcf in E_REQUIRED if key(lhs, pcf) not in found]
    record_property("acceptance", f"{len(found)} verified identities, missing {missing}, {elapsed:.1f}s (limit 300s)")
    assert code == 0 and not missing and elapsed < 300


# 3 ----------------------------------------------------------------------------


def test_c03_rediscover_pi(record_property, tmp_path, db):
    out = tmp_path / "pi.json"
    code = run_cli("search", "--config", os.path.join(CONFIGS, "pi_regression.toml"), "-o", out)
    found = keys_of(load_conjectures(out))
    rows = [r for r in db if r.note.startswith("pi corpus") and r.cls == cj.EXPONENTIAL]
    brouncker = key("4/pi", "a0=1; a[n] = 2n+1; b[n] = n^2")
    others = [r.note for r in rows if r.key in found and r.key != brouncker]
    record_property("acceptance", f"4/pi found={brouncker in found}, other exponential pi rows: {others}")
    assert code == 0 and brouncker in found and len(others) >= 3


# 4 ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "config, swap, note",
    [("zeta3_planted.toml", True, "other constants 16"), ("catalan_planted.toml", False, "other constants 19")],
    ids=["zeta3", "catalan"],
)
def test_c04_planted_searches(record_property, tmp_path, db, config, swap, note):
    out = tmp_path / "planted.json"
    argv = ["search", "--config", os.path.join(CONFIGS, config), "-o", out] + (["--swap"] if swap else [])
    code = run_cli(*argv)
    row = db_row(db, note)
    found = keys_of(load_conjectures(out))
    record_property("acceptance", f"{row.lhs.format()} <> {row.pcf.format()}: found={row.key in found}")
    assert code == 0 and row.key in found


# 5 ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "note, published", [("pi corpus 3", 0.75789), ("other constants 15", 3.0316), ("other constants 1", 2.069)],
    ids=["4_over_pi", "6_over_zeta3", "30_over_pi2"],
)
def test_c05_convergence_rates(record_property, db, note, published):
    row = db_row(db, note)
    assert row.rate == published
    window = (50, 200) if row.cls == cj.SUPER_EXPONENTIAL else (50, 1000)
    measured = convergence.measure_rate(row.pcf, window)
    rel = abs(measured - published) / published
    record_property("acceptance", f"{row.lhs.format()}: measured {measured:.5f} vs {published} ({100 * rel:.2f}%, limit 5%)")
    assert rel <= 0.05


# 6 ----------------------------------------------------------------------------


def test_c06_classifier_concordance(record_property, db):
    wrong = [r.note for r in db if convergence.classify(r.pcf).cls != r.cls]
    record_property("acceptance", f"{len(db) - len(wrong)}/{len(db)} rows agree, mismatches {wrong}")
    assert not wrong


# 7 ----------------------------------------------------------------------------


def test_c07_descent_repel(record_property, tmp_path):
    out = tmp_path / "opt.json"
    t0 = time.perf_counter()
    code = run_cli("optimize", "--config", os.path.join(CONFIGS, "descent_e.toml"), "-o", out)
    elapsed = time.perf_counter() - t0
    doc = json.loads(out.read_text())
    tmpl = doc["template"]
    conjs = [cj.Conjecture.from_json(c) for c in doc["conjectures"]]
    points = [c.metadata.get("point") for c in conjs]
    target = key("e", "a0=3; a[n] = n+3; b[n] = -n")
    ok = [c for c in conjs if c.metadata.get("point") == [4, -1] and c.status == cj.VERIFIED
          and c.verified_digits >= 50 and cj.canonical_pair(c.lhs, c.pcf) == target]
    record_property("acceptance", f"count={doc['optimizer']['count']} depth={tmpl['depth']} points={points}, "
                                  f"(4,-1) verified={bool(ok)}, {elapsed:.1f}s (limit 900s)")
    assert code == 0 and doc["optimizer"]["count"] == 500 and tmpl["depth"] == 20
    assert ok and elapsed < 900


# 8 ----------------------------------------------------------------------------


def random_pcf(rng, da, db_, lo=-5, hi=5):
    a = IntPolynomial(tuple(rng.randint(lo, hi) for _ in range(da + 1)))
    b = IntPolynomial(tuple(rng.randint(lo, hi) for _ in range(db_ + 1)))
    try:
        return PcfDefinition.simple(a, b, rng.randint(lo, hi))
    except ValueError:  # beta with a natural root
        return None


def test_c08_leibniz_bound_soundness(record_property):
    rng = random.Random(8)
    sampled = available = 0
    violations = []
    while sampled < 200:
        da = rng.choice((1, 2))
        pcf = random_pcf(rng, da, 2 * da if rng.random() < 0.7 else da)
        if pcf is None or pcf.alpha[0].degree < 1:
            continue
        try:
            convergence.classify(pcf)
        except (convergence.ClassificationUnavailableError, ArithmeticError, ValueError):
            continue
        depth = rng.randint(3, 30)
        try:
            ref = evaluate(pcf, 10 * depth).fraction()
            eta = evaluate(pcf, depth).fraction()
        except (DegenerateConvergentError, ZeroDivisionError):
            continue
        sampled += 1
        try:
            bound = error_bound_leibniz(pcf, depth)
        except (BoundUnavailableError, DegenerateConvergentError):
            continue
        available += 1
        if abs(ref - eta) > bound.bound:
            violations.append(pcf.format())
    record_property("acceptance", f"200 PCFs, bound available for {available}, violations {len(violations)}")
    assert available >= 50 and not violations


# 9 ----------------------------------------------------------------------------

TAIL_DIGITS = 1500


def _eligible(db):
    rows = []
    for r in db:
        if r.cls == cj.EXPONENTIAL and r.pcf.period == 1 and limiting_c(r.pcf) is not None and r.note != "golden ratio":
            rows.append(r)
    return rows[:20]


def test_c09_tail_acceleration(record_property, db):
    rows = _eligible(db)
    assert len(rows) == 20
    worst_spread = 0.0
    failures = []
    for r in rows:
        ref = r.lhs.value(TAIL_DIGITS + 20)
        gains = {}
        for d in (100, 200, 400):
            plain = evaluate(r.pcf, d).to_decimal(TAIL_DIGITS)
            fast = accelerate_with_tail(r.pcf, d, TAIL_DIGITS)
            gains[d] = numerics.log10_agreement(fast, ref) - numerics.log10_agreement(plain, ref)
        spread = max(abs(gains[d] - gains[200]) for d in gains)
        worst_spread = max(worst_spread, spread)
        if gains[100] <= 0 or spread > 1:
            failures.append((r.note, {d: round(g, 2) for d, g in gains.items()}))
    record_property("acceptance", f"20 rows, worst |gain(d) - gain(200)| = {worst_spread:.2f} digits, failures {failures}")
    assert not failures


# 10 ---------------------------------------------------------------------------


def test_c10_planted_coincidences_rejected(record_property):
    rng = np.random.default_rng(10)
    space = mitm.RhsSpace(1, 1, (-6, 6), (-6, 6))
    table = mitm.build_rhs_table(space, 10)
    recs = table.records[table.records["klen"] >= 10]
    picks = rng.choice(len(recs), size=1000, replace=False)
    literals, planted = [], set()
    for idx in picks:
        pcf = space.pcf(recs[idx]["coef"])
        true = evaluate_to_precision(pcf, 130).value
        with localcontext() as ctx:
            ctx.prec = 140
            while True:
                delta = Decimal(10) ** Decimal(-rng.uniform(10.05, 10.95))
                fake = true * (1 + delta * (1 if rng.random() < 0.5 else -1))
                agree = numerics.decimal_digits_agreeing(fake, true)
                if 10 <= agree <= 11:
                    break
        lit = str(numerics.round_to(fake, 120))
        literals.append(lit)
        planted.add((lit, pcf.format()))
    lhs_space = LhsSpace(tuple(literals), 1, 0, (0, 1), ("identity",))
    hits = [h for h in mitm.query_lhs_against_table(lhs_space, table)
            if h.lhs.gamma.coeffs == (0, 1) and h.lhs.delta.coeffs == (1,)]
    ours = [h for h in hits if (h.lhs.constant, h.pcf.format()) in planted]
    matched = {(h.lhs.constant, h.pcf.format()) for h in ours}
    refined = list(mitm.refine_hits(ours))
    survivors = [h for h in refined if h.status != mitm.REJECTED]
    confidence = cj.coincidence_confidence(10**9, 50)
    record_property("acceptance", f"{len(matched)}/1000 planted pairs matched, {len(survivors)} survived the ladder, "
                                  f"confidence(1e9, 50) = {confidence:g}")
    assert len(matched) == 1000 and not survivors and confidence <= -40


# 11 ---------------------------------------------------------------------------


def test_c11_oracle_equivalence(record_property):
    rng = random.Random(11)
    done = mismatches = 0
    while done < 500:
        period = rng.choice((1, 1, 2))
        alpha = tuple(IntPolynomial(tuple(rng.randint(-9, 9) for _ in range(rng.randint(1, 3)))) for _ in range(period))
        beta = tuple(IntPolynomial(tuple(rng.randint(-9, 9) for _ in range(rng.randint(1, 5)))) for _ in range(period))
        try:
            pcf = PcfDefinition(alpha, beta, rng.randint(-9, 9))
        except ValueError:
            continue
        depth = rng.randint(1, 25)
        try:
            oracle = top_down(pcf.a0, pcf.a, pcf.b, depth)
        except ZeroDivisionError:
            continue
        try:
            ours = evaluate(pcf, depth).fraction()
        except DegenerateConvergentError:
            mismatches += 1
            done += 1
            continue
        mismatches += ours != oracle
        done += 1
    record_property("acceptance", f"500 cases, {mismatches} mismatches")
    assert mismatches == 0


# 12 ---------------------------------------------------------------------------


def test_c12_lucas_family(record_property):
    mpmath.mp.dps = 120
    phi = (1 + mpmath.sqrt(5)) / 2
    bad = []
    for k in range(1, 11):
        c = cj.lucas_family(k, 50)
        limit = mpmath.mpf(str(cj.lucas_limit(k, 60)))
        agree = -mpmath.log10(abs(limit - phi**k) / phi**k)
        if c.status != cj.VERIFIED or c.verified_digits < 50 or agree < 50:
            bad.append(k)
    record_property("acceptance", f"k=1..10, failures {bad}")
    assert not bad


# 13 ---------------------------------------------------------------------------


def test_c13_binomial_family(record_property):
    digits = {}
    for z in (1, 2, 3, 5):
        pcf = PcfDefinition.simple(IntPolynomial((1, 3)), IntPolynomial((0, 2 * z + 1, -2)), 1)
        assert [pcf.b(n) for n in (1, 2)] == [2 * z - 1, 2 * (2 * z - 3)] and [pcf.a(n) for n in (1, 2)] == [4, 7]
        with localcontext() as ctx:
            ctx.prec = 60
            target = Decimal(2) ** (2 * z + 1) / (numerics.constant_value("pi", 60) * comb(2 * z, z))
        value = evaluate_to_precision(pcf, 45).value
        digits[z] = numerics.decimal_digits_agreeing(value, target)
    record_property("acceptance", f"digits of agreement {digits} (need 30)")
    assert all(d >= 30 for d in digits.values())


# smoke ------------------------------------------------------------------------


def test_smoke_ten_million_table(record_property, tmp_path):
    space = mitm.RhsSpace(1, 2, (-12, 12), ((-12, 12), (-12, 12), (-13, 13)))
    assert space.size() >= 10**7
    t0 = time.perf_counter()
    table = mitm.build_rhs_table(space, 10, threads=os.cpu_count() or 1)
    built = time.perf_counter() - t0
    path = tmp_path / "big.bin"
    table.save(path)
    back = mitm.FingerprintTable.load(path)
    same = back.to_bytes() == table.to_bytes() and np.array_equal(back.records, table.records)
    record_property("acceptance", f"{space.size():,} candidates, {len(table.records):,} stored, build {built:.1f}s, "
                                  f"round trip equal={same}")
    c = table.header["counters"]
    dropped = c["alpha_zero"] + c["beta_root"] + c["duplicate"] + c["degenerate"] + c["unreliable"]
    assert same and dropped + c["stored"] == c["enumerated"] == space.size()
