"""Random isolation trees: fitting on subsamples and leaf lookup.

A fitted tree is stored as flat node arrays (see :mod:`aniso._kernels`);
:class:`Split` and :class:`Leaf` records are built on demand for inspection
and serialization.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from aniso import _kernels
from aniso._accel import USE_NUMBA, n_threads
from aniso.errors import DataError, DimensionMismatch, EmptySubsample, ConfigError

_MASK64 = (1 << 64) - 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``N x d`` matrix of finite reals with optional 0/1 labels (1 = anomaly)."""

    values: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"expected a non-empty N x d matrix, got shape {values.shape}")
        if not np.isfinite(values).all():
            row, col = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {row}, column {col}")
        object.__setattr__(self, "values", _frozen(values))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (values.shape[0],):
                raise DataError(
                    f"labels have shape {labels.shape}, expected ({values.shape[0]},)")
            if not np.isin(labels, (0, 1)).all():
                raise DataError("labels must be 0 or 1")
            object.__setattr__(self, "labels", _frozen(labels.astype(np.int8)))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def as_matrix(data, d: Optional[int] = None) -> np.ndarray:
    """Coerce a Dataset, a matrix or a single point to a float ``(N, d)`` array."""
    if isinstance(data, Dataset):
        X = data.values
    else:
        X = np.asarray(data, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got {X.ndim}-D")
    if d is not None and X.shape[1] != d:
        raise DimensionMismatch(f"model expects {d} features, got {X.shape[1]}")
    return X


@dataclass(frozen=True, eq=False)
class HyperRectangle:
    """Axis-aligned box ``lower <= x < upper``; bounds may be infinite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=np.float64).reshape(-1)
        upper = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionMismatch("lower and upper bounds differ in length")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", _frozen(lower))
        object.__setattr__(self, "upper", _frozen(upper))

    @classmethod
    def everything(cls, d: int) -> HyperRectangle:
        return cls(np.full(d, -np.inf), np.full(d, np.inf))

    @classmethod
    def bounding(cls, points: np.ndarray) -> HyperRectangle:
        """Tight bounding box of a point cloud (closed on both ends)."""
        points = np.asarray(points, dtype=np.float64)
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def extents(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(self.lower <= x) and np.all(x < self.upper))

    def __eq__(self, other):
        if not isinstance(other, HyperRectangle):
            return NotImplemented
        return (np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    def __repr__(self):
        return f"HyperRectangle(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True)
class Leaf:
    depth: int
    count: int
    rect: HyperRectangle
    node: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: TreeNode
    right: TreeNode


TreeNode = Union[Split, Leaf]


@dataclass(frozen=True)
class FitConfig:
    n_estimators: int = 100
    subsample_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.subsample_size < 1:
            raise ConfigError(f"subsample_size must be >= 1, got {self.subsample_size}")


def max_depth_for(psi: int) -> int:
    """``ceil(log2(psi))`` computed exactly on integers; 0 for ``psi == 1``."""
    return (int(psi) - 1).bit_length()


class IsolationTree:
    """One fitted isolation tree.

    Attributes:
        feature, threshold, left, right: split table, ``feature == -1`` on leaves.
        depth, count: per-node depth and number of subsample points.
        lower, upper: per-node region, ``(n_nodes, d)``.
        subsample_size: number of points the tree was grown on.
        bounding_box: tight bounding box of that subsample.
    """

    def __init__(self, feature, threshold, left, right, depth, count, lower, upper,
                 subsample_size: int, bounding_box: HyperRectangle):
        self.feature = _frozen(np.ascontiguousarray(feature, dtype=np.int64))
        self.threshold = _frozen(np.ascontiguousarray(threshold, dtype=np.float64))
        self.left = _frozen(np.ascontiguousarray(left, dtype=np.int64))
        self.right = _frozen(np.ascontiguousarray(right, dtype=np.int64))
        self.depth = _frozen(np.ascontiguousarray(depth, dtype=np.int64))
        self.count = _frozen(np.ascontiguousarray(count, dtype=np.int64))
        self.lower = _frozen(np.ascontiguousarray(lower, dtype=np.float64))
        self.upper = _frozen(np.ascontiguousarray(upper, dtype=np.float64))
        self.subsample_size = int(subsample_size)
        self.bounding_box = bounding_box

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_features(self) -> int:
        return self.lower.shape[1]

    @cached_property
    def leaf_nodes(self) -> np.ndarray:
        return _frozen(np.flatnonzero(self.feature < 0))

    def node(self, i: int) -> TreeNode:
        """Materialize the subtree rooted at node ``i``."""
        if self.feature[i] < 0:
            return Leaf(int(self.depth[i]), int(self.count[i]),
                        HyperRectangle(self.lower[i], self.upper[i]), node=int(i))
        return Split(int(self.feature[i]), float(self.threshold[i]),
                     self.node(self.left[i]), self.node(self.right[i]))

    @property
    def root(self) -> TreeNode:
        return self.node(0)

    def leaves(self) -> list[Leaf]:
        return [self.node(i) for i in self.leaf_nodes]

    def leaf_ids(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        return _kernels.descend(self.feature, self.threshold, self.left, self.right, X)

    @classmethod
    def from_root(cls, root: TreeNode, subsample_size: int,
                  bounding_box: HyperRectangle) -> IsolationTree:
        """Build the array form from nested nodes.

        Leaf rectangles are recomputed from the split thresholds, so the
        ``rect`` fields of the given leaves are ignored.
        """
        d = bounding_box.dim
        rows = []

        def visit(n, lower, upper, depth):
            i = len(rows)
            rows.append(None)
            if isinstance(n, Leaf):
                rows[i] = (-1, 0.0, -1, -1, depth, n.count, lower, upper)
                return i, n.count
            if not 0 <= n.feature < d:
                raise DataError(f"split feature {n.feature} out of range for d={d}")
            lu = upper.copy()
            lu[n.feature] = n.threshold
            rl = lower.copy()
            rl[n.feature] = n.threshold
            li, lc = visit(n.left, lower, lu, depth + 1)
            ri, rc = visit(n.right, rl, upper, depth + 1)
            rows[i] = (n.feature, n.threshold, li, ri, depth, lc + rc, lower, upper)
            return i, lc + rc

        visit(root, np.full(d, -np.inf), np.full(d, np.inf), 0)
        cols = list(zip(*rows))
        return cls(*cols[:6], np.array(cols[6]).reshape(-1, d),
                   np.array(cols[7]).reshape(-1, d), subsample_size, bounding_box)


class ForestModel:
    """An immutable ensemble of isolation trees.

    ``data_bounds`` is the bounding box of the full training set; it backs the
    global bounding-volume policy.
    """

    def __init__(self, trees: Sequence[IsolationTree], config: FitConfig,
                 data_bounds: HyperRectangle):
        if len(trees) < 1:
            raise ConfigError("a forest needs at least one tree")
        dims = {t.n_features for t in trees}
        if len(dims) != 1:
            raise DimensionMismatch(f"trees disagree on dimensionality: {sorted(dims)}")
        self.trees = tuple(trees)
        self.config = config
        self.data_bounds = data_bounds

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @cached_property
    def _packed(self):
        width = max(t.n_nodes for t in self.trees)
        n = len(self.trees)
        feature = np.full((n, width), -1, np.int64)
        threshold = np.zeros((n, width))
        left = np.full((n, width), -1, np.int64)
        right = np.full((n, width), -1, np.int64)
        for i, t in enumerate(self.trees):
            k = t.n_nodes
            feature[i, :k] = t.feature
            threshold[i, :k] = t.threshold
            left[i, :k] = t.left
            right[i, :k] = t.right
        return feature, threshold, left, right

    def leaf_ids(self, X) -> np.ndarray:
        """Leaf node id of every point in every tree, shape ``(N, n_estimators)``."""
        X = np.ascontiguousarray(as_matrix(X, self.n_features))
        return _kernels.descend_forest(*self._packed, X)


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index`` of a forest seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def subsample(data, psi: int, rng: np.random.Generator) -> np.ndarray:
    """``min(psi, N)`` distinct row indices drawn uniformly without replacement."""
    n = as_matrix(data).shape[0]
    if psi < 1:
        raise ConfigError(f"psi must be >= 1, got {psi}")
    return rng.choice(n, size=min(int(psi), n), replace=False)


def fit_tree(points, rng: np.random.Generator) -> IsolationTree:
    """Grow one isolation tree on all rows of ``points``."""
    points = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if points.ndim != 2 or points.shape[0] == 0:
        raise EmptySubsample("cannot grow a tree on an empty subsample")
    psi = points.shape[0]
    # each split consumes two draws and there are at most psi - 1 splits
    uniforms = rng.random(2 * psi)
    arrays = _kernels.grow_tree(points, uniforms, max_depth_for(psi))
    return IsolationTree(*arrays, subsample_size=psi,
                         bounding_box=HyperRectangle.bounding(points))


def _fit_one(X: np.ndarray, config: FitConfig, index: int) -> IsolationTree:
    rng = tree_rng(config.seed, index)
    rows = np.sort(subsample(X, config.subsample_size, rng))
    return fit_tree(X[rows], rng)


def fit_forest(data, config: FitConfig = FitConfig()) -> ForestModel:
    """Fit ``config.n_estimators`` trees, each on its own subsample and RNG stream.

    Tree ``i`` depends only on ``(config.seed, i)`` and the data, so the
    result does not depend on the number of worker threads.
    """
    X = np.ascontiguousarray(as_matrix(data))
    if X.shape[0] == 0:
        raise EmptySubsample("cannot fit a forest on an empty dataset")
    workers = min(n_threads(), config.n_estimators)
    if USE_NUMBA and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trees = list(pool.map(lambda i: _fit_one(X, config, i),
                                  range(config.n_estimators)))
    else:
        trees = [_fit_one(X, config, i) for i in range(config.n_estimators)]
    return ForestModel(trees, config, HyperRectangle.bounding(X))


def locate_leaf(tree: IsolationTree, x) -> Leaf:
    """The unique leaf of ``tree`` whose rectangle contains point ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != tree.n_features:
        raise DimensionMismatch(
            f"expected a point with {tree.n_features} coordinates, got shape {x.shape}")
    i = int(tree.leaf_ids(x.reshape(1, -1))[0])
    return tree.node(i)
