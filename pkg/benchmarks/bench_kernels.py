"""Numba vs numpy measurement kernel, plus an end-to-end simulate run per backend.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

The end-to-end comparison launches ``klmismatch simulate`` in subprocesses
with and without ``KLMISMATCH_DISABLE_NUMBA=1`` and checks the CSVs match.
"""
import argparse
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from klmismatch import kernels as K
from klmismatch._accel import HAS_NUMBA


def stack(n, C, X, seed=0):
    rng = np.random.default_rng(seed)
    pr = rng.gamma(0.3, size=(n, C, X)) + 1e-300
    q = rng.gamma(0.3, size=(n, C, X)) + 1e-300
    pr /= pr.sum(axis=(1, 2), keepdims=True)
    q /= q.sum(axis=(1, 2), keepdims=True)
    return pr, q


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_table(n, repeat):
    print("shape,n,numpy_s,numba_s,speedup,max_abs_diff")
    for C, X in ((2, 2), (4, 6), (8, 8)):
        pr, q = stack(n, C, X)
        t_np = best_of(lambda: K.measure_batch_numpy(pr, q), repeat)
        if not HAS_NUMBA:
            print(f"{C}x{X},{n},{t_np:.4f},,,")
            continue
        K.measure_batch_numba(pr[:2], q[:2])  # compile outside the timing
        t_nb = best_of(lambda: K.measure_batch_numba(pr, q), repeat)
        diff = np.nanmax(np.abs(K.measure_batch_numba(pr, q) - K.measure_batch_numpy(pr, q)))
        print(f"{C}x{X},{n},{t_np:.4f},{t_nb:.4f},{t_np / t_nb:.1f},{diff:.2g}")


def end_to_end(samples):
    print("\nbackend,simulate_s")
    outputs = {}
    with tempfile.TemporaryDirectory() as tmp:
        for name, flag in (("numba", "0"), ("numpy", "1")):
            out = Path(tmp) / f"{name}.csv"
            env = dict(os.environ, KLMISMATCH_DISABLE_NUMBA=flag)
            cmd = [sys.executable, "-m", "klmismatch", "simulate", "--samples", str(samples),
                   "--seed", "42", "--out", str(out)]
            t0 = time.perf_counter()
            subprocess.run(cmd, env=env, check=True, capture_output=True)
            print(f"{name},{time.perf_counter() - t0:.2f}")
            outputs[name] = out.read_bytes()
    print(f"identical_csv,{outputs['numba'] == outputs['numpy']}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--samples", type=int, default=50_000)
    args = ap.parse_args()
    kernel_table(args.n, args.repeat)
    end_to_end(args.samples)


if __name__ == "__main__":
    main()
