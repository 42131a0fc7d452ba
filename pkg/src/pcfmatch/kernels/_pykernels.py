"""Numpy reference implementations of the batch kernels.

Every floating-point operation happens in the same order as in the compiled
module, so both backends give bit-identical results on IEEE hardware.
"""
from __future__ import annotations

import numpy as np

BIG = 2.0**512
SMALL = 2.0**-512


def _horner(coef: np.ndarray, start: int, width: int, x: float) -> np.ndarray:
    acc = np.zeros(coef.shape[0])
    for i in range(width - 1, -1, -1):
        acc = acc * x + coef[:, start + i]
    return acc


def eval_pcf_batch(alpha, beta, a0, depth, period, da1, db1):
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    a0 = np.asarray(a0, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.int64)
    n_rows = alpha.shape[0]
    out = np.full(n_rows, np.nan)
    prev = np.full(n_rows, np.nan)
    if n_rows == 0:
        return out, prev
    # rows sorted by decreasing depth: the active set is always a prefix
    order = np.argsort(-depth, kind="stable")
    al, be, d = alpha[order], beta[order], depth[order]
    pp = np.ones(n_rows)
    p = a0[order].copy()
    qp = np.zeros(n_rows)
    q = np.ones(n_rows)
    out_s = np.full(n_rows, np.nan)
    prev_s = np.full(n_rows, np.nan)
    neg_d = -d
    done = np.searchsorted(neg_d, 0, side="left")  # rows with depth <= 0 sit at the end
    _store(out_s, prev_s, p, q, pp, qp, done, n_rows)
    max_depth = int(d[0]) if n_rows else 0
    with np.errstate(all="ignore"):
        for n in range(1, max_depth + 1):
            m = int(np.searchsorted(neg_d, -n, side="right"))  # rows with depth >= n
            slot = n % period
            x = float(n)
            an = _horner(al[:m], slot * da1, da1, x)
            bn = _horner(be[:m], slot * db1, db1, x)
            tp = an * p[:m] + bn * pp[:m]
            tq = an * q[:m] + bn * qp[:m]
            pp[:m] = p[:m]
            qp[:m] = q[:m]
            p[:m] = tp
            q[:m] = tq
            mag = np.maximum(np.abs(p[:m]), np.abs(q[:m]))
            up = mag > BIG
            down = (mag < SMALL) & (mag > 0.0)
            for arr in (p, q, pp, qp):
                seg = arr[:m]
                seg[up] *= SMALL
                seg[down] *= BIG
            lo = int(np.searchsorted(neg_d, -n, side="left"))  # rows with depth > n
            _store(out_s, prev_s, p, q, pp, qp, lo, m)
    out[order] = out_s
    prev[order] = prev_s
    return out, prev


def _store(out, prev, p, q, pp, qp, lo, hi):
    if hi <= lo:
        return
    with np.errstate(all="ignore"):
        qs = q[lo:hi]
        qps = qp[lo:hi]
        out[lo:hi] = np.where(qs != 0.0, p[lo:hi] / np.where(qs != 0.0, qs, 1.0), np.nan)
        prev[lo:hi] = np.where(qps != 0.0, pp[lo:hi] / np.where(qps != 0.0, qps, 1.0), np.nan)
