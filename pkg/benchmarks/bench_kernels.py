"""Compiled vs pure-Python kernel timings, plus an end-to-end Q16.8 solve.

Usage::

    python benchmarks/bench_kernels.py [--sizes 64 256] [--repeat 5]

Each kernel is timed on both backends with identical inputs; the table
reports the best-of-``repeat`` wall time and the speedup of the compiled
build. The end-to-end row runs the solver in a subprocess per backend so
that ``SPLITKIT_PURE_PYTHON`` takes effect at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from splitkit import _kernels_py

try:
    from splitkit import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

FRAC, WORD = 8, 24

SOLVE_SNIPPET = """
import time
from splitkit import kernels, solvers
from splitkit.problem import LassoSpec, generate_lasso
prob, _ = generate_lasso(LassoSpec(n={n}, m={m}, s=2, seed=1), force=True)
cfg = solvers.SolverConfig(scheme="{scheme}", max_iter={iters}, arithmetic="Q16.8")
t = time.perf_counter()
solvers.run(prob, cfg)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def kernel_cases(n, rng):
    qM = rng.integers(-2 ** 12, 2 ** 12, size=(n, n))
    qv = rng.integers(-2 ** 12, 2 ** 12, size=n)
    G = np.tril(rng.integers(-2 ** 8, 2 ** 8, size=(n, n)))
    np.fill_diagonal(G, 2 ** 10)
    recip = np.full(n, 2 ** 6)
    S = rng.standard_normal((n, n))
    S = S @ S.T + n * np.eye(n)
    L = np.linalg.cholesky(S)
    b = rng.standard_normal(n)
    small = S[: min(n, 48), : min(n, 48)]
    return {
        "q_matvec (sat)": lambda k: k.q_matvec(qM, qv, FRAC, WORD, False, True),
        "q_matvec (wrap)": lambda k: k.q_matvec(qM, qv, FRAC, WORD, False, False),
        "q_trisolve": lambda k: k.q_trisolve(G, recip, qv, True, FRAC, WORD, False, True),
        "cholesky": lambda k: k.cholesky(S),
        "trisolve": lambda k: k.trisolve(L, b, True),
        f"jacobi ({small.shape[0]}x{small.shape[0]})": lambda k: k.jacobi_eigvals(small),
    }


def best(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def end_to_end(n, iters, scheme):
    out = {}
    for pure in ("1", "0"):
        env = dict(os.environ, SPLITKIT_PURE_PYTHON=pure)
        code = SOLVE_SNIPPET.format(n=n, m=max(2, n // 2), scheme=scheme, iters=iters)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--iters", type=int, default=20, help="iterations for the end-to-end row")
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the fallback can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'n':>6}{'python (s)':>14}{'cython (s)':>14}{'speedup':>10}")
    for n in args.sizes:
        for name, fn in kernel_cases(n, rng).items():
            tp = best(lambda: fn(_kernels_py), args.repeat)
            if _compiled is None:
                print(f"{name:<22}{n:>6}{tp:>14.3e}{'-':>14}{'-':>10}")
                continue
            tc = best(lambda: fn(_compiled), args.repeat)
            print(f"{name:<22}{n:>6}{tp:>14.3e}{tc:>14.3e}{tp / tc:>9.1f}x")
    if _compiled is not None:
        for scheme in ("admm", "dfgpgd"):
            n = args.sizes[0]
            t = end_to_end(n, args.iters, scheme)
            label = f"Q16.8 {scheme} x{args.iters}"
            print(f"{label:<22}{n:>6}{t['python']:>14.3e}{t['cython']:>14.3e}"
                  f"{t['python'] / t['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
