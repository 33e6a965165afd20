"""Compare the Cython and numpy kernel backends.

Times ``sat_rhs`` and ``design_matrix`` directly, then a full adaptive run
in a subprocess per backend (the backend is chosen at import)::

    python benchmarks/bench_kernels.py --K 4 --N 80 --T 0.1
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from adaptive_sbp import _pykernels
from adaptive_sbp.operators import make_sbp42

try:
    from adaptive_sbp import _ckernels
except ImportError:
    _ckernels = None

RUN_SNIPPET = """
import time
from adaptive_sbp import BACKEND, BlockGrid, SolverConfig, run
cfg = SolverConfig(T={T})
t0 = time.perf_counter()
err = run(cfg, BlockGrid({K}, {N}), sample=False).final_error
print(BACKEND, time.perf_counter() - t0, err)
"""


def _best(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def bench_kernels(K, N, number):
    rng = np.random.default_rng(0)
    op = make_sbp42(N, 1.0 / (K * N))
    w = np.tile(op.coefficients, (K, 1))
    pinv = np.tile(op.P.inverse_diagonal, (K, 1))
    u = rng.standard_normal((K, N + 1))
    out = np.empty_like(u)
    a = np.empty((N + 1, 14))
    rows = []
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    for name, mod in backends:
        t_rhs = _best(lambda: mod.sat_rhs(w, pinv, u, 1.0, out), number)
        t_dm = _best(lambda: mod.design_matrix(u[0], a), number)
        rows.append((name, t_rhs, t_dm))
    return rows


def bench_run(K, N, T):
    rows = []
    for pure in ("1", "0"):
        env = dict(os.environ, ADAPTIVE_SBP_PURE=pure)
        out = subprocess.run(
            [sys.executable, "-c", RUN_SNIPPET.format(K=K, N=N, T=T)],
            env=env, capture_output=True, text=True, check=True).stdout
        name, seconds, err = out.split()
        rows.append((name, float(seconds), float(err)))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--N", type=int, default=80)
    p.add_argument("--T", type=float, default=0.1)
    p.add_argument("--number", type=int, default=2000)
    args = p.parse_args(argv)

    if _ckernels is None:
        print("Cython extension not built; timing the numpy backend only")
    print(f"kernels, K={args.K} N={args.N} (microseconds per call)")
    print(f"{'backend':<8} {'sat_rhs':>10} {'design_matrix':>14}")
    for name, t_rhs, t_dm in bench_kernels(args.K, args.N, args.number):
        print(f"{name:<8} {1e6 * t_rhs:>10.2f} {1e6 * t_dm:>14.2f}")

    print(f"\nadaptive run, K={args.K} N={args.N} T={args.T}")
    print(f"{'backend':<8} {'seconds':>10} {'final error':>14}")
    for name, seconds, err in bench_run(args.K, args.N, args.T):
        print(f"{name:<8} {seconds:>10.3f} {err:>14.6e}")


if __name__ == "__main__":
    main()
