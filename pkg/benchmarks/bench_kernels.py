"""Compare the compiled and reference kernel backends on the two hot loops.

Usage: python3 benchmarks/bench_kernels.py [--rounds 5] [--threads N]

Prints the median wall time per call and the speedup of the compiled
extension over the NumPy reference, plus the largest numerical
disagreement between the two, for a few matrix sizes.
"""

import argparse
import statistics
import time

import numpy as np

from slimboard import kernels, synth
from slimboard.kernels import pure

SIZES = (
    (500, 400, 20_000),
    (2_000, 1_500, 150_000),
    (5_000, 3_000, 500_000),
)


def time_call(fn, rounds):
    samples = []
    for _ in range(rounds):
        started = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - started)
    return statistics.median(samples)


def as_pure_args(csc):
    return (
        csc.indptr.astype(np.int64),
        csc.indices.astype(np.int64),
        csc.data.astype(np.float64),
    )


def bench_scan(X, rounds):
    csc = X.csc
    resid = np.ascontiguousarray(X.csr.toarray())
    candidates = np.arange(X.num_items, dtype=np.int64)
    col_sq = X.item_sq_norms()
    args = (candidates, col_sq, 0.5, 0.5)

    native = time_call(
        lambda: kernels.greedy_scan_deltas(resid, csc.indptr, csc.indices, csc.data, *args),
        rounds,
    )
    reference = time_call(
        lambda: pure.greedy_scan_deltas(resid, *as_pure_args(csc), *args),
        rounds,
    )
    a = kernels.greedy_scan_deltas(resid, csc.indptr, csc.indices, csc.data, *args)
    b = pure.greedy_scan_deltas(resid, *as_pure_args(csc), *args)
    gap = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))
    return native, reference, gap


def bench_sweep(X, rounds):
    csc = X.csc
    col_sq = X.item_sq_norms()
    n = X.num_items

    def run_active():
        W = np.zeros((n, n))
        R = np.asfortranarray(X.csr.toarray())
        kernels.cd_sweep(csc.indptr, csc.indices, csc.data, W, R, col_sq, 0.5, 0.5)
        return W

    def run_reference():
        W = np.zeros((n, n))
        R = np.asfortranarray(X.csr.toarray())
        pure.cd_sweep(*as_pure_args(csc), W, R, col_sq, 0.5, 0.5)
        return W

    native = time_call(run_active, rounds)
    reference = time_call(run_reference, rounds)
    a, b = run_active(), run_reference()
    gap = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))
    return native, reference, gap


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rounds", type=int, default=5, help="timed repetitions")
    parser.add_argument("--threads", type=int, default=None, help="worker cap")
    args = parser.parse_args()

    if args.threads is not None:
        kernels.set_num_threads(args.threads)
    print(f"active backend: {kernels.backend_name()}")
    if kernels.backend_name() == "pure":
        print("note: compiled extension unavailable, comparing pure against itself")

    header = f"{'kernel':12} {'users x items':>16} {'active':>10} {'reference':>10} {'speedup':>8} {'max rel gap':>12}"
    print(header)
    print("-" * len(header))
    for m, n, nnz in SIZES:
        X = synth.synthetic_ratings(m, n, nnz, seed=1)
        for name, bench in (("greedy scan", bench_scan), ("cd sweep", bench_sweep)):
            active, reference, gap = bench(X, args.rounds)
            print(
                f"{name:12} {f'{m} x {n}':>16} {active:>9.4f}s {reference:>9.4f}s "
                f"{reference / active:>7.1f}x {gap:>12.2e}"
            )


if __name__ == "__main__":
    main()
