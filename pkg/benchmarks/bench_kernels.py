"""Compiled versus pure-Python kernel timings.

Usage: python benchmarks/bench_kernels.py [--repeat 3] [--trials 20000]

Each kernel runs on identical inputs under both backends; the script also
checks that the two backends return the same numbers.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from robust_rdf import kernels
from robust_rdf.kernels import pure
from robust_rdf.prob import bernoulli, hamming
from robust_rdf.rdf import kernel_from_marginal

EX2 = np.array([0.0006, 0.0003, 0.09, 0.4262, 0.0002, 0.1409, 0.0019, 0.0029, 0.3358, 0.0012])


def _best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def case_ba(mod):
    E = np.ascontiguousarray(np.exp(-2.0 * hamming(10)))

    def run():
        q = np.full(10, 0.1)
        it, ok = mod.ba_iterate(EX2, E, q, 1e-13, 20_000)
        return q, it

    return run


def case_robust(mod):
    E = np.ascontiguousarray(np.exp(-3.0 * hamming(10)))

    def run():
        q = np.full(10, 0.1)
        it, ok = mod.robust_iterate(EX2, E, q, 0.05, 1e-13, 20_000)
        return q, it

    return run


def case_pfr(mod, trials):
    Q = kernel_from_marginal([0.5, 0.5], np.log(9), hamming(2))
    S = np.array([bernoulli(0.1), bernoulli(0.4)])
    qs = np.ascontiguousarray(S @ Q)
    qcdf = np.ascontiguousarray(np.cumsum(qs, axis=1))
    qcdf[:, -1] = 1.0
    rmin = np.array([[min(qs[a, y] / Q[x, y] for y in range(2)) for x in range(2)] for a in range(2)])
    xcdf = np.cumsum(S[1])
    xcdf[-1] = 1.0
    empty = np.zeros(0, dtype=np.int64)

    def run():
        return mod.pfr_trials(Q, qs, qcdf, rmin, xcdf, empty, empty, 12345, 0, trials)

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--trials", type=int, default=20_000, help="PFR trials per run")
    args = ap.parse_args(argv)

    fast = kernels.compiled()
    if fast is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1

    cases = [
        ("ba_iterate (|X|=10, s=2)", case_ba),
        ("robust_iterate (|X|=10, s=3, lam=0.05)", case_robust),
        (f"pfr_trials ({args.trials} trials)", lambda m: case_pfr(m, args.trials)),
    ]
    print(f"{'kernel':42s} {'cython [s]':>11s} {'python [s]':>11s} {'speedup':>8s}  match")
    for name, make in cases:
        tc, oc = _best_of(make(fast), args.repeat)
        tp, op = _best_of(make(pure), args.repeat)
        if isinstance(oc[0], np.ndarray) and len(oc) == 2:
            match = np.allclose(oc[0], op[0], rtol=0, atol=1e-12) and oc[1] == op[1]
        else:
            match = all(np.array_equal(a, b) for a, b in zip(oc, op))
        print(f"{name:42s} {tc:11.4f} {tp:11.4f} {tp / tc:8.1f}x  {match}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
