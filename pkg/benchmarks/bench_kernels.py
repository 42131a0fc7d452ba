"""Compare the compiled and numpy batch PCF evaluators.

    python3 benchmarks/bench_kernels.py [--rows 200000] [--depth 64] [--repeat 3]

Both backends get the same random linear/quadratic rows.  The script reports
rows per second for each and checks that the outputs are bit-identical.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from pcfmatch import kernels


def workload(rows: int, depth: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    alpha = rng.integers(-6, 7, size=(rows, 2)).astype(np.float64)
    beta = rng.integers(-6, 7, size=(rows, 3)).astype(np.float64)
    alpha[:, 1] = np.where(alpha[:, 1] == 0, 1, alpha[:, 1])
    a0 = alpha[:, 0].copy()
    depths = np.full(rows, depth, dtype=np.int64)
    return alpha, beta, a0, depths, 1, 2, 3


def time_backend(mod, args, repeat: int) -> tuple[float, tuple]:
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = mod.eval_pcf_batch(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--depth", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    work = workload(args.rows, args.depth)
    report = {"rows": args.rows, "depth": args.depth, "default_backend": kernels.BACKEND, "backends": {}}
    outputs = {}
    for name, mod in sorted(kernels.backends().items()):
        secs, out = time_backend(mod, work, args.repeat)
        outputs[name] = out
        report["backends"][name] = {"seconds": round(secs, 4), "rows_per_second": round(args.rows / secs)}
    if len(outputs) == 2:
        (_, a), (_, b) = sorted(outputs.items())
        report["bit_identical"] = all(np.array_equal(x, y, equal_nan=True) for x, y in zip(a, b))
        report["speedup"] = round(report["backends"]["python"]["seconds"] / report["backends"]["cython"]["seconds"], 2)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
