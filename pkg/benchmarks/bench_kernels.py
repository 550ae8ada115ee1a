"""Time the compiled tree builder against the pure-Python fallback.

Run from the repository root after an editable install::

    python3 benchmarks/bench_kernels.py --trees 20
"""

import argparse
import math
import time

import numpy as np

from oculodec._kernels import _tree_py

try:
    from oculodec._kernels import _tree as _tree_c
except ImportError:
    _tree_c = None


def problem(n: int, d: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(np.int64)
    return X, y


def time_backend(mod, X, y, n_trees: int) -> float:
    mtry = max(1, int(math.sqrt(X.shape[1])))
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    for t in range(n_trees):
        sample = rng.integers(0, X.shape[0], X.shape[0])
        mod.build_tree(X, y, sample, 2, -1, mtry, t)
    return (time.perf_counter() - t0) / n_trees


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trees", type=int, default=20)
    p.add_argument("--shapes", default="400x832,400x200,2000x64",
                   help="comma list of rows x features")
    a = p.parse_args(argv)
    print(f"{'shape':>10} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for shape in a.shapes.split(","):
        n, d = map(int, shape.split("x"))
        X, y = problem(n, d)
        py = time_backend(_tree_py, X, y, a.trees)
        if _tree_c is None:
            print(f"{shape:>10} {py * 1e3:10.2f} {'n/a':>12} {'n/a':>8}")
            continue
        c = time_backend(_tree_c, X, y, a.trees)
        print(f"{shape:>10} {py * 1e3:10.2f} {c * 1e3:12.2f} {py / c:7.1f}x")


if __name__ == "__main__":
    main()
