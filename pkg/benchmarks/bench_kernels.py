"""Compare the numba and pure-numpy phase-space kernels.

Usage:
    python3 benchmarks/bench_kernels.py [--dim 30] [--points 201] [--repeat 5]

Prints best-of-N wall times per backend and the maximum disagreement
between them. The first numba call (JIT compile, or cache load) is timed
separately.
"""

import argparse
import time

import numpy as np

from qretro import _kernels
from qretro.detectors import ApdParams, apd_off_diagonal


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def random_density(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dim", type=int, default=30)
    parser.add_argument("--points", type=int, default=201)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    xs = np.linspace(-5, 5, args.points)
    ps = np.linspace(-5, 5, args.points)
    rho = random_density(args.dim, np.random.default_rng(args.seed))
    coeffs = (-0.4) ** np.arange(args.dim) * apd_off_diagonal(ApdParams(0.6, 0.1), args.dim)

    cases = [
        ("wigner_fock", _kernels.wigner_fock_numba, _kernels.wigner_fock_numpy, rho),
        ("laguerre_series", _kernels.laguerre_series_numba, _kernels.laguerre_series_numpy, coeffs),
    ]
    print(f"grid {args.points}x{args.points}, D={args.dim}, best of {args.repeat}")
    for name, fast, slow, arg in cases:
        t0 = time.perf_counter()
        fast(xs[:2], ps[:2], arg)
        warm = time.perf_counter() - t0
        t_fast, w_fast = best_of(lambda: fast(xs, ps, arg), args.repeat)
        t_slow, w_slow = best_of(lambda: slow(xs, ps, arg), args.repeat)
        diff = float(np.max(np.abs(w_fast - w_slow)))
        print(
            f"{name:16s} numba {t_fast * 1e3:9.2f} ms (first call {warm:.2f} s)"
            f"  numpy {t_slow * 1e3:9.2f} ms  speedup {t_slow / t_fast:6.2f}x  max|diff| {diff:.2e}"
        )


if __name__ == "__main__":
    main()
