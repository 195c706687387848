"""Benchmark the compiled kernels against the numpy fallback.

The hot path of the sample-based optimizer is per_gain_confusions: for each
of T gain matrices, classify all m tune points by weighted argmax and
accumulate an n x n confusion matrix. This script times that kernel (plus
the two smaller ones) on a representative workload for both backends and
reports the speedup.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--m 100000] [--classes 3] [--gains 500]
"""

from __future__ import annotations

import argparse
import importlib
import os
import subprocess
import sys
import time

import numpy as np


def make_workload(m: int, n: int, t: int, seed: int):
    rng = np.random.default_rng(seed)
    eta = rng.dirichlet(np.ones(n), size=m)
    labels = rng.integers(0, n, size=m).astype(np.int64)
    gains = rng.uniform(-1.0, 1.0, size=(t, n, n))
    weights = rng.dirichlet(np.ones(t))
    return eta, labels, gains, weights


def bench(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def run_backend(args) -> dict:
    import confopt._kernels as kernels

    eta, labels, gains, weights = make_workload(args.m, args.classes, args.gains, args.seed)
    results = {"backend": kernels.BACKEND}
    results["per_gain_confusions"] = bench(
        lambda: kernels.per_gain_confusions(eta, labels, gains), args.repeats
    )
    results["weighted_argmax_batch"] = bench(
        lambda: kernels.weighted_argmax_batch(eta, gains[0]), args.repeats
    )
    results["mixture_predictions"] = bench(
        lambda: kernels.mixture_predictions(eta, gains, weights), args.repeats
    )
    # Correctness spot check so a broken backend cannot post a fast time.
    conf = kernels.per_gain_confusions(eta, labels, gains[:3])
    assert conf.shape == (3, args.classes, args.classes)
    assert np.allclose(conf.sum(axis=(1, 2)), 1.0)
    return results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=100_000, help="tune points")
    parser.add_argument("--classes", type=int, default=3)
    parser.add_argument("--gains", type=int, default=500, help="optimizer iterations T")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        # Child process: backend was fixed by the environment before import.
        res = run_backend(args)
        print("RESULT " + repr(res))
        return 0

    rows = []
    for force_numpy in (False, True):
        env = dict(os.environ)
        env.pop("CONFOPT_FORCE_NUMPY_KERNELS", None)
        if force_numpy:
            env["CONFOPT_FORCE_NUMPY_KERNELS"] = "1"
        cmd = [sys.executable, os.path.abspath(__file__), "--worker",
               "--m", str(args.m), "--classes", str(args.classes),
               "--gains", str(args.gains), "--repeats", str(args.repeats),
               "--seed", str(args.seed)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        line = [l for l in out.stdout.splitlines() if l.startswith("RESULT ")][-1]
        rows.append(eval(line[len("RESULT "):], {}, {}))

    names = ["per_gain_confusions", "weighted_argmax_batch", "mixture_predictions"]
    print(f"workload: m={args.m} n={args.classes} T={args.gains} "
          f"(best of {args.repeats})")
    print(f"{'kernel':<24} {rows[0]['backend']:>12} {rows[1]['backend']:>12} {'speedup':>9}")
    for name in names:
        a, b = rows[0][name], rows[1][name]
        print(f"{name:<24} {a:>11.4f}s {b:>11.4f}s {b / a:>8.2f}x")
    if rows[0]["backend"] == rows[1]["backend"]:
        print("note: compiled extension unavailable; both runs used the numpy fallback")
    return 0


if __name__ == "__main__":
    sys.exit(main())
