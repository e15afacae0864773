#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel paths.

Times the all-deletions Givens sweep, the deleted-Gram solves and the full
fast core construction for both algorithms, plus the O(s^4) baseline for
reference. Prints a table, or JSON with ``--json``.

    python benchmarks/bench_kernels.py --s 20 60 140 --repeat 5
"""

import argparse
import json
import statistics
import sys
import time

from sketchjack import _accel, kernels
from sketchjack import nystrom as nys
from sketchjack import rsvd as rs
from sketchjack.testmat import gen_exp_decay


def _time(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _cases(s, d):
    A = gen_exp_decay(d, 5, 0.25)
    r = rs.rsvd(A, s, 2, seed=1)
    n = nys.nystrom(A, s, seed=1)
    factors, _, _ = kernels.deletion_qr_all(n.C, use_numba=False)
    return {
        "deletion_qr_all": lambda nb: kernels.deletion_qr_all(r.R, use_numba=nb),
        "deleted_gram_solves": lambda nb: kernels.deleted_gram_solves(factors, n.B, use_numba=nb),
        "rsvd_fast_cores": lambda nb: rs.core_replicates_fast(r, use_numba=nb),
        "nystrom_fast_cores": lambda nb: nys.core_replicates_fast(n, use_numba=nb),
    }, {
        "rsvd_baseline_cores": lambda: rs.core_replicates_baseline(r),
        "nystrom_baseline_cores": lambda: nys.core_replicates_baseline(n),
    }


def run(s_values, d, repeat):
    results = []
    for s in s_values:
        paired, single = _cases(s, d)
        for name, fn in paired.items():
            row = {"s": s, "kernel": name,
                   "numpy_s": _time(lambda: fn(False), repeat)}
            if _accel.NUMBA_AVAILABLE:
                row["numba_s"] = _time(lambda: fn(True), repeat)
                row["speedup"] = row["numpy_s"] / row["numba_s"]
            results.append(row)
        for name, fn in single.items():
            results.append({"s": s, "kernel": name, "numpy_s": _time(fn, repeat)})
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s", type=int, nargs="+", default=[20, 60, 140])
    ap.add_argument("--d", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    results = run(args.s, args.d, args.repeat)
    if args.json:
        json.dump(results, sys.stdout, indent=2)
        print()
        return 0
    print(f"numba available: {_accel.NUMBA_AVAILABLE}; default path: "
          f"{'numba' if _accel.NUMBA_ENABLED else 'numpy'}")
    print(f"{'s':>5} {'kernel':<24} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for r in results:
        nb = f"{1e3 * r['numba_s']:11.3f}" if "numba_s" in r else f"{'-':>11}"
        sp = f"{r['speedup']:8.1f}" if "speedup" in r else f"{'-':>8}"
        print(f"{r['s']:>5} {r['kernel']:<24} {1e3 * r['numpy_s']:11.3f} {nb} {sp}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
