"""Time the compiled kernels against their NumPy fallback.

Run ``python3 benchmarks/bench_kernels.py [--repeat N]``. Each kernel is fed
identical inputs on both backends; the table reports the best-of-N wall time
and the speed-up. Outputs are also compared so a timing row is never printed
for diverging implementations.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np
from numpy.polynomial.hermite import hermgauss

from stratos import _kernels_py

try:
    from stratos import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _cases(n_clusters=20000, size=5, seed=0):
    rng = np.random.default_rng(seed)
    n = n_clusters * size
    offsets = np.arange(0, n + 1, size, dtype=np.int64)
    eta = rng.normal(-1.0, 1.0, n)
    y = (rng.random(n) < 0.3).astype(float)
    sigma2 = 0.5
    b, h, _ = _kernels_py.cluster_modes(eta, y, offsets, sigma2, np.zeros(n_clusters))
    h = h + 1.0 / sigma2
    nodes, weights = hermgauss(7)
    doubled = np.ascontiguousarray(2 * np.arange(1, 17, dtype=np.int64))
    return {
        "cluster_modes": lambda k: k.cluster_modes(eta, y, offsets, sigma2, np.zeros(n_clusters)),
        "cluster_loglik": lambda k: k.cluster_loglik(eta, y, offsets, b),
        "agq_log_integrals(7)": lambda k: k.agq_log_integrals(eta, y, offsets, b, h, sigma2, nodes, weights),
        "agq_posterior_residuals(7)": lambda k: k.agq_posterior_residuals(eta, y, offsets, b, h, sigma2, nodes,
                                                                          weights),
        "rank_sum_counts(16, 8)": lambda k: k.rank_sum_counts(doubled, 8),
    }


def _same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(np.asarray(u, dtype=float), np.asarray(v, dtype=float), rtol=1e-9, atol=1e-9)
               for u, v in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--clusters", type=int, default=20000)
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled kernels unavailable; nothing to compare")
        return 1
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}")
    for name, run in _cases(args.clusters).items():
        if not _same(run(_kernels_py), run(_kernels_c)):
            print(f"{name:<28}  outputs differ between backends")
            continue
        t_py = min(timeit.repeat(lambda: run(_kernels_py), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: run(_kernels_c), number=1, repeat=args.repeat))
        print(f"{name:<28}{1e3 * t_py:>12.2f}{1e3 * t_c:>13.2f}{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
