# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels (float64).  Mirrors _pykernels operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, NAN

cnp.import_array()

cdef double BIG = 1.3407807929942597e154      # 2**512
cdef double SMALL = 7.458340731200207e-155    # 2**-512


cdef inline double _horner(const double[:, ::1] coef, Py_ssize_t row, Py_ssize_t start,
                           Py_ssize_t width, double x) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(width - 1, -1, -1):
        acc = acc * x + coef[row, start + i]
    return acc


def eval_pcf_batch(const double[:, ::1] alpha, const double[:, ::1] beta,
                   const double[::1] a0, const long long[::1] depth,
                   int period, int da1, int db1):
    """Convergents eta_D and eta_{D-1} of each row's PCF at its own depth D.

    alpha is (N, period*da1) with slot j's coefficients (constant first) at
    columns j*da1 .. j*da1+da1-1; beta likewise with db1.
    """
    cdef Py_ssize_t N = alpha.shape[0]
    out_np = np.empty(N, dtype=np.float64)
    prev_np = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef double[::1] prev = prev_np
    cdef Py_ssize_t r, slot
    cdef long long n, D
    cdef double p, q, pp, qp, an, bn, tp, tq, x, m
    with nogil:
        for r in range(N):
            pp = 1.0
            p = a0[r]
            qp = 0.0
            q = 1.0
            D = depth[r]
            for n in range(1, D + 1):
                slot = n % period
                x = <double> n
                an = _horner(alpha, r, slot * da1, da1, x)
                bn = _horner(beta, r, slot * db1, db1, x)
                tp = an * p
                tp = tp + bn * pp
                tq = an * q
                tq = tq + bn * qp
                pp = p
                qp = q
                p = tp
                q = tq
                m = fabs(p)
                if fabs(q) > m:
                    m = fabs(q)
                if m > BIG:
                    p = p * SMALL
                    q = q * SMALL
                    pp = pp * SMALL
                    qp = qp * SMALL
                elif m < SMALL and m > 0.0:
                    p = p * BIG
                    q = q * BIG
                    pp = pp * BIG
                    qp = qp * BIG
            out[r] = p / q if q != 0.0 else NAN
            prev[r] = pp / qp if qp != 0.0 else NAN
    return out_np, prev_np

