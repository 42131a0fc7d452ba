"""Meet-in-the-middle search: fingerprint tables of PCF (or LHS) values.

One side is enumerated into a sorted fingerprint table, the other side is
streamed against it, and collisions ("hits") are re-checked at increasing
precision.

Fingerprints
    A value v is keyed by its first ``l`` significant digits, rounded:
    ``key = sign(v) * ((e10 + 400) * 10**l + m)`` with ``m`` the l-digit
    mantissa and ``e10`` the decimal exponent.  The encoding is monotone in v,
    so every value within a relative tolerance of a probe lies in one
    contiguous key range.  A pair (left, right) is a hit when
    ``|v_l - v_r| <= 10**(1 - l) * max(|v_l|, |v_r|)`` where ``l`` is the
    smaller of the two reliabilities.  The predicate is symmetric, which is
    what makes the swapped search return the same hits.

Table file layout (little endian)
    8 bytes   magic ``PCFMTAB1``
    u32       header length H
    H bytes   UTF-8 JSON header, keys sorted (schema_version, side,
              fingerprint_length, constants, space, space_hash, count,
              counters, ncoef)
    records   ``count`` packed records: key i8, value f8, klen u1, flags u1,
              index i8, coef i2[ncoef]; sorted by (klen, key, index)
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels, numerics
from .conjecture import coincidence_confidence  # noqa: F401  (re-export)
from .convergence import EXPONENTIAL, SUPER_EXPONENTIAL, classify
from .lhs import LhsExpression, LhsSpace, enumerate_lhs, lhs_value
from .pcf import PcfDefinition, evaluate_to_precision
from .poly import IntPolynomial

MAGIC = b"PCFMTAB1"
SCHEMA_VERSION = 1
FINGERPRINT_LENGTH = 10
MIN_RELIABLE_DIGITS = 6
DEPTH_BUCKETS = tuple(2**i for i in range(4, 13))  # 16 .. 4096
SUB_EXPONENTIAL_DEPTH = 4000
DEFAULT_SHARD = 1 << 18
DEFAULT_LADDER = (10, 30, 100)

FLAG_TRUNCATED = 1
FLAG_LHS = 2

SIDE_RHS = "rhs"
SIDE_LHS = "lhs"

_EXP_OFFSET = 400


class TableFormatError(ValueError):
    pass


class ConstantMismatchError(ValueError):
    pass


# -- fingerprints ----------------------------------------------------------


@dataclass(frozen=True)
class Fingerprint:
    key: int
    length: int

    @classmethod
    def of(cls, value, length: int = FINGERPRINT_LENGTH) -> "Fingerprint":
        return cls(int(fingerprint_keys(np.array([float(value)]), length)[0]), length)


def fingerprint_keys(values: np.ndarray, lengths) -> np.ndarray:
    """Vectorised monotone keys; ``lengths`` is a scalar or per-value array."""
    v = np.asarray(values, dtype=np.float64)
    ell = np.broadcast_to(np.asarray(lengths, dtype=np.int64), v.shape)
    a = np.abs(v)
    out = np.zeros(v.shape, dtype=np.int64)
    ok = np.isfinite(v) & (a > 0)
    if not ok.any():
        return out
    a_ok = a[ok]
    l_ok = ell[ok]
    e = np.floor(np.log10(a_ok)).astype(np.int64)
    # log10 may land on the wrong side of a power of ten
    e = np.where(a_ok < _pow10(e), e - 1, e)
    e = np.where(a_ok >= _pow10(e + 1), e + 1, e)
    shift = l_ok - 1 - e
    scaled = np.where(shift >= 0, a_ok * _pow10(np.maximum(shift, 0)), a_ok / _pow10(np.maximum(-shift, 0)))
    m = np.rint(scaled).astype(np.int64)
    top = _ipow10(l_ok)
    carry = m >= top
    m = np.where(carry, top // 10, m)
    e = np.where(carry, e + 1, e)
    e = np.clip(e, -_EXP_OFFSET + 1, _EXP_OFFSET - 1)
    key = (e + _EXP_OFFSET) * top + m
    out[ok] = np.where(v[ok] < 0, -key, key)
    return out


def _pow10(k: np.ndarray) -> np.ndarray:
    return np.power(10.0, k.astype(np.float64))


_IPOW = np.array([10**i for i in range(19)], dtype=np.int64)


def _ipow10(k: np.ndarray) -> np.ndarray:
    return _IPOW[k]


def match_tolerance(length) -> np.ndarray:
    return np.power(10.0, 1 - np.asarray(length, dtype=np.float64))


def values_match(a, b, length) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) <= match_tolerance(length) * np.maximum(np.abs(a), np.abs(b))


def probe_range(values: np.ndarray, length) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive key bounds covering every value the predicate can accept."""
    v = np.asarray(values, dtype=np.float64)
    tol = match_tolerance(length)
    pad = 1e-12
    a = np.abs(v)
    lo_mag = a * (1 - tol) * (1 - pad)
    hi_mag = a / (1 - tol) * (1 + pad)
    lo = np.where(v >= 0, lo_mag, -hi_mag)
    hi = np.where(v >= 0, hi_mag, -lo_mag)
    return fingerprint_keys(lo, length), fingerprint_keys(hi, length)


def agreement_digits(a: float, b: float) -> float:
    if a == b:
        return math.inf
    return -math.log10(abs(a - b) / max(abs(a), abs(b)))


# -- record layout -----------------------------------------------------------


def record_dtype(ncoef: int) -> np.dtype:
    return np.dtype(
        [("key", "<i8"), ("value", "<f8"), ("klen", "u1"), ("flags", "u1"), ("index", "<i8"), ("coef", "<i2", (ncoef,))]
    )


@dataclass
class FingerprintTable:
    header: dict
    records: np.ndarray

    @property
    def fingerprint_length(self) -> int:
        return int(self.header["fingerprint_length"])

    @property
    def side(self) -> str:
        return self.header["side"]

    def __len__(self) -> int:
        return len(self.records)

    def groups(self) -> list[tuple[int, int, int]]:
        """(klen, start, stop) slices of the record array, one per key length."""
        klen = self.records["klen"]
        out = []
        for ell in np.unique(klen):
            start = int(np.searchsorted(klen, ell, side="left"))
            stop = int(np.searchsorted(klen, ell, side="right"))
            out.append((int(ell), start, stop))
        return out

    def lookup(self, value: float, length: int | None = None) -> np.ndarray:
        """Records matching ``value`` (reliability ``length``, default full)."""
        length = length or self.fingerprint_length
        rows = []
        for ell, start, stop in self.groups():
            eff = min(ell, length)
            lo, hi = probe_range(np.array([value]), eff)
            keys = self.records["key"][start:stop]
            i = start + int(np.searchsorted(keys, lo[0], side="left"))
            j = start + int(np.searchsorted(keys, hi[0], side="right"))
            cand = self.records[i:j]
            rows.append(cand[values_match(cand["value"], value, eff)])
        if not rows:
            return self.records[:0]
        return np.concatenate(rows)

    # -- persistence ------------------------------------------------------
    def to_bytes(self) -> bytes:
        header = dict(self.header)
        header["count"] = int(len(self.records))
        header["ncoef"] = int(self.records.dtype["coef"].shape[0]) if len(self.records.dtype["coef"].shape) else 0
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return MAGIC + np.uint32(len(blob)).astype("<u4").tobytes() + blob + self.records.tobytes()

    def save(self, path) -> None:
        """Atomic write: the target either holds the full table or is untouched."""
        path = os.fspath(path)
        directory = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(prefix=".pcftab-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(self.to_bytes())
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_bytes(cls, data: bytes) -> "FingerprintTable":
        if len(data) < 12 or data[:8] != MAGIC:
            raise TableFormatError("bad magic")
        (hlen,) = np.frombuffer(data[8:12], dtype="<u4")
        try:
            header = json.loads(data[12 : 12 + int(hlen)].decode())
            version = header.get("schema_version")
            ncoef, count = int(header["ncoef"]), int(header["count"])
        except (ValueError, KeyError, AttributeError, TypeError) as exc:
            raise TableFormatError(f"unreadable header: {exc}") from exc
        if version != SCHEMA_VERSION:
            raise TableFormatError(f"unsupported schema version {version}")
        dtype = record_dtype(ncoef)
        body = data[12 + int(hlen) :]
        if len(body) != dtype.itemsize * count:
            raise TableFormatError("record section length does not match header count")
        records = np.frombuffer(body, dtype=dtype).copy()
        if count > 1:
            # sorted by (klen, key)
            dk = np.diff(records["klen"].astype(np.int16))
            if np.any(dk < 0) or np.any((dk == 0) & (np.diff(records["key"]) < 0)):
                raise TableFormatError("records are not sorted by key")
        return cls(header, records)

    @classmethod
    def load(cls, path) -> "FingerprintTable":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _sort_records(records: np.ndarray) -> np.ndarray:
    order = np.lexsort((records["index"], records["key"], records["klen"]))
    return records[order]


def space_hash(space_json: dict) -> str:
    blob = json.dumps(space_json, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# -- RHS space -------------------------------------------------------------


def _ranges(spec, count: int) -> tuple[tuple[int, int], ...]:
    """A single (lo, hi) for every coefficient, or an explicit per-coefficient list."""
    if len(spec) == 2 and all(isinstance(x, (int, np.integer)) for x in spec):
        out = (tuple(int(x) for x in spec),) * count
    else:
        out = tuple((int(lo), int(hi)) for lo, hi in spec)
    if len(out) != count:
        raise ValueError(f"expected {count} coefficient ranges, got {len(out)}")
    for lo, hi in out:
        if lo > hi:
            raise ValueError("empty coefficient range")
        if max(abs(lo), abs(hi)) > 2**15 - 1:
            raise ValueError("coefficients must fit in int16")
    return out


@dataclass(frozen=True)
class RhsSpace:
    """PCF family enumerated in mixed radix, last coordinate fastest.

    Coordinates: alpha slot 0 (constant term first), alpha slot 1, ...,
    beta slot 0, ..., then a0 when ``a0_range`` is given (otherwise
    a0 = alpha slot 0 at n = 0).  ``alpha_range``/``beta_range`` take one
    (lo, hi) pair for all coefficients or one pair per coefficient.
    """

    alpha_degree: int = 1
    beta_degree: int = 1
    alpha_range: tuple = (-5, 5)
    beta_range: tuple = (-5, 5)
    period: int = 1
    a0_range: tuple | None = None
    depth: int | None = None  # fixed table depth instead of the per-PCF policy

    def __post_init__(self):
        k = self.period
        if k < 1 or self.alpha_degree < 0 or self.beta_degree < 0:
            raise ValueError("period >= 1 and non-negative degrees required")
        object.__setattr__(self, "alpha_range", _ranges(self.alpha_range, k * (self.alpha_degree + 1)))
        object.__setattr__(self, "beta_range", _ranges(self.beta_range, k * (self.beta_degree + 1)))
        if self.a0_range is not None:
            object.__setattr__(self, "a0_range", _ranges(self.a0_range, 1)[0])

    @property
    def na(self) -> int:
        return self.period * (self.alpha_degree + 1)

    @property
    def nb(self) -> int:
        return self.period * (self.beta_degree + 1)

    @property
    def ncoef(self) -> int:
        return self.na + self.nb + 1

    def coordinate_ranges(self) -> list[tuple[int, int]]:
        out = list(self.alpha_range) + list(self.beta_range)
        if self.a0_range is not None:
            out.append(self.a0_range)
        return out

    def size(self) -> int:
        return math.prod(hi - lo + 1 for lo, hi in self.coordinate_ranges())

    def decode(self, index: np.ndarray) -> np.ndarray:
        """Coefficient rows (alpha, beta, a0) for enumeration indices."""
        index = np.asarray(index, dtype=np.int64)
        ranges = self.coordinate_ranges()
        cols = []
        rest = index.copy()
        for lo, hi in reversed(ranges):
            width = hi - lo + 1
            cols.append(rest % width + lo)
            rest //= width
        cols.reverse()
        out = np.empty((len(index), self.ncoef), dtype=np.int64)
        out[:, : len(cols)] = np.stack(cols, axis=1) if cols else 0
        if self.a0_range is None:
            out[:, -1] = out[:, 0]
        return out

    def pcf(self, row: Sequence[int]) -> PcfDefinition:
        row = [int(x) for x in row]
        da1, db1, k = self.alpha_degree + 1, self.beta_degree + 1, self.period
        alpha = tuple(IntPolynomial(tuple(row[j * da1 : (j + 1) * da1])) for j in range(k))
        beta = tuple(IntPolynomial(tuple(row[self.na + j * db1 : self.na + (j + 1) * db1])) for j in range(k))
        return PcfDefinition(alpha, beta, row[-1])

    def contains_row(self, row: np.ndarray) -> np.ndarray:
        """Vectorised membership of coefficient rows (a0 checked only if ranged)."""
        ok = np.ones(len(row), dtype=bool)
        for j, (lo, hi) in enumerate(list(self.alpha_range) + list(self.beta_range)):
            ok &= (row[:, j] >= lo) & (row[:, j] <= hi)
        if self.a0_range is not None:
            lo, hi = self.a0_range
            ok &= (row[:, -1] >= lo) & (row[:, -1] <= hi)
        return ok

    def to_json(self) -> dict:
        return {
            "alpha_degree": self.alpha_degree,
            "beta_degree": self.beta_degree,
            "alpha_range": [list(r) for r in self.alpha_range],
            "beta_range": [list(r) for r in self.beta_range],
            "period": self.period,
            "a0_range": list(self.a0_range) if self.a0_range is not None else None,
            "depth": self.depth,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RhsSpace":
        return cls(
            data["alpha_degree"],
            data["beta_degree"],
            tuple(tuple(r) for r in data["alpha_range"]),
            tuple(tuple(r) for r in data["beta_range"]),
            data.get("period", 1),
            tuple(data["a0_range"]) if data.get("a0_range") is not None else None,
            data.get("depth"),
        )


_SMALL_PRIMES = [p for p in range(2, 200) if all(p % d for d in range(2, int(p**0.5) + 1))]


def filter_rows(space: RhsSpace, rows: np.ndarray, counters: dict) -> np.ndarray:
    """Mask of rows that are valid, non-rational and canonical."""
    k, da1, db1 = space.period, space.alpha_degree + 1, space.beta_degree + 1
    alpha = rows[:, : space.na]
    beta = rows[:, space.na : space.na + space.nb]
    keep = np.ones(len(rows), dtype=bool)
    for j in range(k):
        keep &= np.any(alpha[:, j * da1 : (j + 1) * da1] != 0, axis=1)
    counters["alpha_zero"] += int((~keep).sum())
    # natural roots: any integer root satisfies |r| <= max|coef|, so a scan is exact
    bound = int(np.abs(beta).max(initial=0)) + 1
    root = np.zeros(len(rows), dtype=bool)
    for n in range(1, bound + 1):
        j = n % k
        coef = beta[:, j * db1 : (j + 1) * db1]
        val = np.zeros(len(rows), dtype=object if bound**db1 > 2**62 else np.int64)
        for i in range(db1 - 1, -1, -1):
            val = val * n + coef[:, i]
        root |= val == 0
    root &= keep
    counters["beta_root"] += int(root.sum())
    keep &= ~root
    dup = _non_canonical(space, rows) & keep
    counters["duplicate"] += int(dup.sum())
    keep &= ~dup
    return keep


def _non_canonical(space: RhsSpace, rows: np.ndarray) -> np.ndarray:
    """Rows equivalent to another in-space row under (r*alpha, r^2*beta, r*a0)."""
    alpha = rows[:, : space.na]
    beta = rows[:, space.na : space.na + space.nb]
    a0 = rows[:, -1]
    g = np.gcd.reduce(np.abs(np.concatenate([alpha, a0[:, None]], axis=1)), axis=1)
    b = np.gcd.reduce(np.abs(beta), axis=1)
    out = np.zeros(len(rows), dtype=bool)
    for p in _SMALL_PRIMES:
        if p > g.max(initial=0):
            break
        cand = (g % p == 0) & (b % (p * p) == 0) & (g > 0)
        if not cand.any():
            continue
        reduced = rows[cand].copy()
        reduced[:, : space.na] //= p
        reduced[:, space.na : space.na + space.nb] //= p * p
        reduced[:, -1] //= p
        idx = np.flatnonzero(cand)
        out[idx[space.contains_row(reduced)]] = True
    # sign: the leading alpha coefficient of slot 0 must be positive
    da1 = space.alpha_degree + 1
    slot0 = alpha[:, :da1]
    nz = slot0 != 0
    last = da1 - 1 - np.argmax(nz[:, ::-1], axis=1)
    lead = slot0[np.arange(len(rows)), last]
    neg = lead < 0
    if neg.any():
        flipped = rows[neg].copy()
        flipped[:, : space.na] *= -1
        flipped[:, -1] *= -1
        idx = np.flatnonzero(neg)
        out[idx[space.contains_row(flipped)]] = True
    return out


# -- depth policy ------------------------------------------------------------


_LOG10_FACT = np.concatenate([[0.0], np.cumsum(np.log10(np.arange(1, 5000)))])


def _bucket(depth: np.ndarray) -> np.ndarray:
    buckets = np.array(DEPTH_BUCKETS)
    idx = np.searchsorted(buckets, depth, side="left")
    return buckets[np.minimum(idx, len(buckets) - 1)]


def _super_exp_depth(j: int, log_c: float, need: float) -> int:
    # error after D terms ~ prod_{i<=D} |C| i^-j
    d = np.arange(1, 4097)
    total = d * log_c - j * _LOG10_FACT[1:4097]
    hit = np.flatnonzero(total <= -need)
    return int(max(16, d[hit[0]])) if len(hit) else DEPTH_BUCKETS[-1]


def table_depths(space: RhsSpace, rows: np.ndarray, length: int) -> np.ndarray:
    """Per-row low-precision depth from the convergence class."""
    if space.depth is not None:
        return np.full(len(rows), int(space.depth), dtype=np.int64)
    need = length + 3
    if space.period != 1:
        out = np.empty(len(rows), dtype=np.int64)
        for i, row in enumerate(rows):
            out[i] = _depth_for_report(classify(space.pcf(row)), need)
        return out
    da1, db1 = space.alpha_degree + 1, space.beta_degree + 1
    alpha = rows[:, :da1]
    beta = rows[:, da1 : da1 + db1]
    da = da1 - 1 - np.argmax((alpha != 0)[:, ::-1], axis=1)
    db = db1 - 1 - np.argmax((beta != 0)[:, ::-1], axis=1)
    al = alpha[np.arange(len(rows)), da].astype(np.float64)
    bl = beta[np.arange(len(rows)), db].astype(np.float64)
    out = np.full(len(rows), SUB_EXPONENTIAL_DEPTH, dtype=np.int64)
    sup = db < 2 * da
    if sup.any():
        j = 2 * da[sup] - db[sup]
        logc = np.round(np.log10(np.abs(bl[sup]) / al[sup] ** 2), 12)
        pairs, inv = np.unique(np.stack([j.astype(np.float64), logc], axis=1), axis=0, return_inverse=True)
        depths = np.array([_super_exp_depth(int(pj), float(pc), need) for pj, pc in pairs])
        out[sup] = _bucket(depths[inv.reshape(-1)])
    ex = db == 2 * da
    if ex.any():
        c = bl[ex] / al[ex] ** 2
        disc = 1 + 4 * c
        good = disc > 0
        with np.errstate(all="ignore"):
            ratio = np.abs(2 * c / (2 * c + 1 + np.sqrt(np.where(good, disc, 1.0))))
            rate = -np.log10(ratio)
        d = np.where(good & (rate > 0), np.ceil(1.5 * need / np.where(rate > 0, rate, 1.0)) + 10, SUB_EXPONENTIAL_DEPTH)
        d = np.minimum(d, 1e9).astype(np.int64)
        sub = ~good | (rate <= 0)
        out_ex = np.where(sub, SUB_EXPONENTIAL_DEPTH, _bucket(d))
        out[ex] = out_ex
    return out


def _depth_for_report(report, need: float) -> int:
    if report.cls == EXPONENTIAL and report.predicted_digits_per_term:
        return int(_bucket(np.array([math.ceil(1.5 * need / report.predicted_digits_per_term) + 10]))[0])
    if report.cls == SUPER_EXPONENTIAL:
        return 64
    return SUB_EXPONENTIAL_DEPTH


# -- table build -------------------------------------------------------------


def _float_digits(eta: np.ndarray, a0: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Digits the float64 recurrence can deliver: cancellation against a0 and
    accumulated rounding over ``depth`` steps."""
    with np.errstate(all="ignore"):
        scale = np.maximum(np.abs(a0), np.abs(eta - a0))
        loss = np.log10(np.maximum(scale / np.abs(eta), 1.0))
        return 15.0 - loss - np.log10(depth.astype(np.float64))


def evaluate_rows(space: RhsSpace, rows: np.ndarray, length: int):
    """(eta, reliability digits, depth) for filtered coefficient rows."""
    depth = table_depths(space, rows, length)
    da1, db1 = space.alpha_degree + 1, space.beta_degree + 1
    alpha = np.ascontiguousarray(rows[:, : space.na], dtype=np.float64)
    beta = np.ascontiguousarray(rows[:, space.na : space.na + space.nb], dtype=np.float64)
    a0 = np.ascontiguousarray(rows[:, -1], dtype=np.float64)
    eta, prev = kernels.eval_pcf_batch(alpha, beta, a0, depth, space.period, da1, db1)
    with np.errstate(all="ignore"):
        gap = np.abs(eta - prev) / np.maximum(np.abs(eta), 1.0)
        gap_digits = np.where(gap > 0, -np.log10(gap), np.inf)
    reliability = np.minimum(gap_digits, _float_digits(eta, a0, depth))
    reliability = np.where(np.isfinite(eta), reliability, -np.inf)
    return eta, reliability, depth


def _new_counters() -> dict:
    return {
        "enumerated": 0,
        "alpha_zero": 0,
        "beta_root": 0,
        "duplicate": 0,
        "degenerate": 0,
        "unreliable": 0,
        "truncated": 0,
        "stored": 0,
    }


def _rhs_shard(space: RhsSpace, start: int, stop: int, length: int):
    counters = _new_counters()
    index = np.arange(start, stop, dtype=np.int64)
    rows = space.decode(index)
    counters["enumerated"] = len(rows)
    keep = filter_rows(space, rows, counters)
    rows, index = rows[keep], index[keep]
    eta, rel, _ = evaluate_rows(space, rows, length)
    degenerate = ~np.isfinite(eta)
    counters["degenerate"] = int(degenerate.sum())
    klen = np.floor(np.minimum(rel, length))
    unreliable = ~degenerate & ~(klen >= MIN_RELIABLE_DIGITS)  # NaN counts as unreliable
    counters["unreliable"] = int(unreliable.sum())
    ok = ~degenerate & ~unreliable
    rows, index, eta, klen = rows[ok], index[ok], eta[ok], klen[ok].astype(np.int64)
    rec = np.zeros(len(rows), dtype=record_dtype(space.ncoef))
    rec["key"] = fingerprint_keys(eta, klen)
    rec["value"] = eta
    rec["klen"] = klen
    rec["flags"] = np.where(klen < length, FLAG_TRUNCATED, 0)
    rec["index"] = index
    rec["coef"] = rows
    counters["truncated"] = int((klen < length).sum())
    counters["stored"] = len(rec)
    return rec, counters


def _shards(total: int, shard: int) -> list[tuple[int, int]]:
    return [(s, min(s + shard, total)) for s in range(0, total, shard)]


def _run_shards(fn, shards, threads: int):
    if threads <= 1 or len(shards) <= 1:
        return [fn(s) for s in shards]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, shards))  # map keeps shard order


def _merge_counters(parts: Iterable[dict]) -> dict:
    total = _new_counters()
    for c in parts:
        for k, v in c.items():
            total[k] += v
    return total


def build_rhs_table(
    space: RhsSpace,
    fingerprint_length: int = FINGERPRINT_LENGTH,
    constants: Sequence[str] = (),
    shard_size: int = DEFAULT_SHARD,
    threads: int = 1,
) -> FingerprintTable:
    if not MIN_RELIABLE_DIGITS <= fingerprint_length <= 15:
        raise ValueError("fingerprint length must be between 6 and 15")
    shards = _shards(space.size(), shard_size)
    results = _run_shards(lambda s: _rhs_shard(space, s[0], s[1], fingerprint_length), shards, threads)
    records = (
        np.concatenate([r for r, _ in results]) if results else np.zeros(0, dtype=record_dtype(space.ncoef))
    )
    counters = _merge_counters(c for _, c in results)
    header = {
        "schema_version": SCHEMA_VERSION,
        "side": SIDE_RHS,
        "fingerprint_length": fingerprint_length,
        "constants": sorted(numerics.canonical_name(c) for c in constants),
        "space": space.to_json(),
        "space_hash": space_hash(space.to_json()),
        "counters": counters,
    }
    return FingerprintTable(header, _sort_records(records))


# -- hits ----------------------------------------------------------------------

CANDIDATE, REFINED, VERIFIED, REJECTED, KNOWN = "candidate", "refined", "verified", "rejected", "known"
_ORDER = {CANDIDATE: 0, REFINED: 1, VERIFIED: 2}
TERMINAL = (REJECTED, KNOWN)


@dataclass
class Hit:
    lhs: LhsExpression
    pcf: PcfDefinition
    match_digits: float
    status: str = CANDIDATE
    rejected_at: int | None = None
    flags: tuple[str, ...] = ()

    def advance(self, status: str) -> None:
        if self.status in TERMINAL:
            raise ValueError(f"hit already {self.status}")
        if status not in TERMINAL and _ORDER[status] < _ORDER[self.status]:
            raise ValueError(f"cannot move from {self.status} back to {status}")
        self.status = status

    def identity(self) -> tuple[str, str]:
        return self.lhs.format(), self.pcf.format()


def _lhs_float_values(exprs: Sequence[LhsExpression]) -> np.ndarray:
    return np.array([float(lhs_value(e, 30)) for e in exprs], dtype=np.float64)


def _probe(table: FingerprintTable, values: np.ndarray, lengths: np.ndarray):
    """Yield (query position, table record position) for every predicate match."""
    keys = table.records["key"]
    stored = table.records["value"]
    for ell, start, stop in table.groups():
        eff = np.minimum(lengths, ell)
        lo, hi = probe_range(values, eff)
        seg = keys[start:stop]
        i = np.searchsorted(seg, lo, side="left")
        j = np.searchsorted(seg, hi, side="right")
        for q in np.flatnonzero(j > i):
            cand = np.arange(start + i[q], start + j[q])
            good = values_match(stored[cand], values[q], eff[q])
            for r in cand[good]:
                yield int(q), int(r)


def query_lhs_against_table(
    space: LhsSpace,
    table: FingerprintTable,
    stats: dict | None = None,
    batch: int = 4096,
) -> Iterator[Hit]:
    """Stream the LHS space against an RHS table; hits come out in LHS order."""
    if table.side != SIDE_RHS:
        raise TableFormatError("query needs an RHS table")
    declared = set(table.header.get("constants") or ())
    if declared and not set(space.constants) <= declared:
        raise ConstantMismatchError(f"table built for {sorted(declared)}, query uses {list(space.constants)}")
    rhs_space = RhsSpace.from_json(table.header["space"])
    length = table.fingerprint_length
    stats = stats if stats is not None else {}
    stats.setdefault("lhs_queried", 0)
    buf: list[LhsExpression] = []

    def flush():
        values = _lhs_float_values(buf)
        stats["lhs_queried"] += len(buf)
        found = sorted(_probe(table, values, np.full(len(buf), length)))
        for q, r in found:
            rec = table.records[r]
            yield Hit(buf[q], rhs_space.pcf(rec["coef"]), agreement_digits(values[q], float(rec["value"])))

    for expr in enumerate_lhs(space):
        buf.append(expr)
        if len(buf) >= batch:
            yield from flush()
            buf = []
    if buf:
        yield from flush()


def build_lhs_table(space: LhsSpace, fingerprint_length: int = FINGERPRINT_LENGTH) -> FingerprintTable:
    exprs = list(enumerate_lhs(space))
    ng, nd = space.gamma_degree + 1, space.delta_degree + 1
    rec = np.zeros(len(exprs), dtype=record_dtype(ng + nd + 1))
    values = _lhs_float_values(exprs)
    rec["value"] = values
    rec["klen"] = fingerprint_length
    rec["flags"] = FLAG_LHS
    rec["index"] = np.arange(len(exprs))
    rec["key"] = fingerprint_keys(values, fingerprint_length)
    for i, e in enumerate(exprs):
        g = list(e.gamma.coeffs) + [0] * (ng - len(e.gamma.coeffs))
        d = list(e.delta.coeffs) + [0] * (nd - len(e.delta.coeffs))
        rec["coef"][i] = g[:ng] + d[:nd] + [space.constants.index(e.constant)]
    header = {
        "schema_version": SCHEMA_VERSION,
        "side": SIDE_LHS,
        "fingerprint_length": fingerprint_length,
        "constants": list(space.constants),
        "space": space.to_json(),
        "space_hash": space_hash(space.to_json()),
        "counters": {"enumerated": len(exprs), "stored": len(exprs)},
    }
    return FingerprintTable(header, _sort_records(rec))


def _lhs_from_record(table: FingerprintTable, coef) -> LhsExpression:
    sp = table.header["space"]
    ng, nd = sp["gamma_degree"] + 1, sp["delta_degree"] + 1
    coef = [int(c) for c in coef]
    return LhsExpression(
        IntPolynomial(tuple(coef[:ng])), IntPolynomial(tuple(coef[ng : ng + nd])), table.header["constants"][coef[-1]]
    )


def search_swapped(
    lhs_space: LhsSpace,
    rhs_space: RhsSpace,
    fingerprint_length: int = FINGERPRINT_LENGTH,
    shard_size: int = DEFAULT_SHARD,
    stats: dict | None = None,
    lhs_table: FingerprintTable | None = None,
) -> Iterator[Hit]:
    """LHS values go in the table and the RHS space is streamed shard by shard."""
    table = lhs_table or build_lhs_table(lhs_space, fingerprint_length)
    if len(table) == 0:
        return
    stats = stats if stats is not None else {}
    stats.setdefault("rhs_streamed", 0)
    for start, stop in _shards(rhs_space.size(), shard_size):
        rec, counters = _rhs_shard(rhs_space, start, stop, fingerprint_length)
        stats["rhs_streamed"] += counters["enumerated"]
        values = rec["value"]
        lengths = rec["klen"].astype(np.int64)
        for q, r in sorted(_probe(table, values, lengths)):
            trow = table.records[r]
            yield Hit(
                _lhs_from_record(table, trow["coef"]),
                rhs_space.pcf(rec["coef"][q]),
                agreement_digits(float(values[q]), float(trow["value"])),
            )


# -- refinement ------------------------------------------------------------------


def refine_hits(
    hits: Iterable[Hit],
    ladder: Sequence[int] = DEFAULT_LADDER,
    max_depth: int = 10**6,
) -> Iterator[Hit]:
    """Re-evaluate each hit at every rung; mismatches are rejected at that rung.

    PCFs that cannot reach a rung (polynomial convergence) stop there and are
    kept as refined with the ``achieved_digits`` flag when they still agree to
    what was achieved.
    """
    ladder = list(ladder)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly increasing")
    for hit in hits:
        if hit.status in TERMINAL:
            yield hit
            continue
        for rung in ladder:
            res = evaluate_to_precision(hit.pcf, rung, max_depth=max_depth)
            try:
                left = lhs_value(hit.lhs, rung + numerics.GUARD_DIGITS)
            except numerics.PrecisionUnavailableError:
                # the LHS cannot be computed this far: keep what earlier rungs established
                hit.flags = tuple(sorted(set(hit.flags) | {"lhs_precision"}))
                if rung == ladder[0]:
                    hit.advance(REJECTED)
                    hit.rejected_at = rung
                else:
                    hit.advance(REFINED)
                break
            except ArithmeticError:
                hit.advance(REJECTED)
                hit.rejected_at = rung
                break
            agree = numerics.decimal_digits_agreeing(left, res.value)
            if not res.reached:
                achieved = int(math.floor(res.digits))
                if agree >= min(rung, achieved) - 1 and agree >= ladder[0]:
                    hit.match_digits = min(agree, achieved)
                    hit.flags = tuple(sorted(set(hit.flags) | {"achieved_digits"}))
                    hit.advance(REFINED)
                else:
                    hit.advance(REJECTED)
                    hit.rejected_at = rung
                break
            if agree < rung:
                hit.advance(REJECTED)
                hit.rejected_at = rung
                break
            hit.match_digits = min(agree, rung)
        else:
            hit.advance(REFINED)
        yield hit
