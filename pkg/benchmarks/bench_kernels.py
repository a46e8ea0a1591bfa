"""Time the numba kernels against their pure-numpy counterparts.

    python benchmarks/bench_kernels.py [--rows 300] [--cols 2000] [--trees 100] [--repeat 3]

The first numba call of each kernel compiles (or loads the on-disk cache);
a warm-up call is made before timing. Results from both backends are also
checked for equality.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from bicdetect import kernels


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _data(rows, cols, seed):
    rng = np.random.default_rng(seed)
    X = sp.random(rows, cols, density=0.02, random_state=seed, format="csr",
                  data_rvs=lambda n: rng.integers(1, 5, n).astype(float))
    y = (np.asarray(X[:, :5].sum(axis=1)).ravel() + rng.random(rows) > 1.5).astype(float)
    return X, y


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=300)
    ap.add_argument("--cols", type=int, default=2000)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    X, y = _data(args.rows, args.cols, 0)
    mtry = int(np.sqrt(args.cols))
    ranks = np.arange(2, 42, 2, dtype=np.int64)  # 20 doubled ranks

    cases = {
        "forest fit": lambda b: kernels.fit_forest(X, y, n_trees=args.trees, mtry=mtry, seed=1, backend=b),
        "perceptron": lambda b: kernels.perceptron_fit(X, 2 * y - 1, epochs=50, seed=1, backend=b),
        "signed-rank tail (n=20)": lambda b: kernels.signed_rank_tail_count(ranks, 30, backend=b),
    }
    forest = kernels.fit_forest(X, y, n_trees=args.trees, mtry=mtry, seed=1, backend="numpy")
    cases["forest apply"] = lambda b: kernels.apply_forest(forest, X, backend=b)

    print(f"{'kernel':<26}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  equal")
    for name, fn in cases.items():
        fn("numba")  # compile / load cache
        t_nb, r_nb = _time(lambda: fn("numba"), args.repeat)
        t_np, r_np = _time(lambda: fn("numpy"), args.repeat)
        print(f"{name:<26}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>9.1f}  {_equal(r_nb, r_np)}")


def _equal(a, b):
    if isinstance(a, dict):
        return all(_equal(a[k], b[k]) for k in a)
    if isinstance(a, tuple):
        return all(_equal(x, z) for x, z in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


if __name__ == "__main__":
    main()
