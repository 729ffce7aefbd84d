"""Time the numba kernels against their numpy fallbacks.

Run from the repository root after installing the package::

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --psi 256 --trees 100 --points 20000 --dims 10

Each kernel pair is first checked for identical output, then timed with
``timeit`` (best of ``--repeat`` runs). The numba timings exclude
compilation because of an untimed warm-up call.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from aniso import _kernels
from aniso._accel import USE_NUMBA
from aniso.forest import FitConfig, fit_forest, max_depth_for


def _best(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.2 and number < 10_000:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_grow(psi: int, dims: int, repeat: int, rng: np.random.Generator):
    points = np.ascontiguousarray(rng.normal(size=(psi, dims)))
    uniforms = rng.random(2 * psi)
    depth = max_depth_for(psi)
    a = _kernels.grow_tree_numba(points, uniforms, depth)
    b = _kernels.grow_tree_numpy(points, uniforms, depth)
    assert all(np.array_equal(x, y) for x, y in zip(a, b)), "grow_tree backends disagree"
    return (_best(lambda: _kernels.grow_tree_numba(points, uniforms, depth), repeat),
            _best(lambda: _kernels.grow_tree_numpy(points, uniforms, depth), repeat))


def bench_descend(psi: int, trees: int, points: int, dims: int, repeat: int,
                  rng: np.random.Generator):
    X = rng.normal(size=(max(psi, 2 * psi), dims))
    model = fit_forest(X, FitConfig(n_estimators=trees, subsample_size=psi, seed=1))
    Q = np.ascontiguousarray(rng.normal(size=(points, dims)))
    packed = model._packed
    a = _kernels.descend_forest_numba(*packed, Q)
    b = _kernels.descend_forest_numpy(*packed, Q)
    assert np.array_equal(a, b), "descend_forest backends disagree"
    return (_best(lambda: _kernels.descend_forest_numba(*packed, Q), repeat),
            _best(lambda: _kernels.descend_forest_numpy(*packed, Q), repeat))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--psi", type=int, default=256, help="subsample size per tree")
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--points", type=int, default=10_000, help="query points to route")
    parser.add_argument("--dims", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if not USE_NUMBA:
        print("note: ANISO_NUMBA is off, the 'numba' column runs uncompiled loops")

    rng = np.random.default_rng(args.seed)
    rows = [
        (f"grow_tree psi={args.psi} d={args.dims}",
         *bench_grow(args.psi, args.dims, args.repeat, rng)),
        (f"descend_forest {args.trees} trees x {args.points} pts",
         *bench_descend(args.psi, args.trees, args.points, args.dims, args.repeat, rng)),
    ]
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numba':>11}  {'numpy':>11}  speedup")
    for name, fast, slow in rows:
        print(f"{name:<{width}}  {fast * 1e3:9.3f}ms  {slow * 1e3:9.3f}ms  {slow / fast:6.1f}x")


if __name__ == "__main__":
    main()
