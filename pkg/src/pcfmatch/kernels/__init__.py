"""Batch float64 kernels: compiled when available, numpy otherwise.

Set ``PCFMATCH_PURE_PYTHON=1`` to force the numpy implementation.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PCFMATCH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def backends() -> dict:
    """Name -> module for every importable backend (used by tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def eval_pcf_batch(alpha, beta, a0, depth, period, da1, db1):
    return _impl.eval_pcf_batch(alpha, beta, a0, depth, period, da1, db1)
