"""Per-estimator scores: normalized leaf depth and leaf hypervolume density.

Both scores follow the same direction: smaller means more anomalous.

Scoring a batch goes through per-tree lookup tables (one score per leaf),
so the only per-point work is the leaf descent in :mod:`aniso._kernels`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from aniso.errors import ConfigError, DimensionMismatch, DomainError
from aniso.forest import ForestModel, HyperRectangle, IsolationTree, as_matrix, locate_leaf

EULER_GAMMA = 0.5772156649015329
EXACT_HARMONIC_LIMIT = 10**6
DEFAULT_EXPANSION = 0.005
EPS_VOL = 1e-12
# exp() of anything above this overflows float64
_MAX_LOG = 709.0


class ScorerKind(str, enum.Enum):
    DEPTH = "depth"
    VOLUME = "volume"


class BoundingPolicy(str, enum.Enum):
    SUBSAMPLE = "subsample"
    GLOBAL = "global"
    USER = "user"


@dataclass(frozen=True)
class Scorer:
    """Which per-estimator score to compute and how.

    ``strict_paper_depth`` drops the ``c(leaf.count)`` correction for
    truncated leaves. ``bounding_policy`` and ``expansion`` only matter for
    the volume score; ``bounding_box`` is required for the user policy and
    is given as ``(lower, upper)`` tuples.
    """

    kind: ScorerKind = ScorerKind.DEPTH
    strict_paper_depth: bool = False
    bounding_policy: BoundingPolicy = BoundingPolicy.SUBSAMPLE
    bounding_box: Optional[tuple[tuple[float, ...], tuple[float, ...]]] = None
    expansion: float = DEFAULT_EXPANSION

    def __post_init__(self):
        object.__setattr__(self, "kind", ScorerKind(self.kind))
        object.__setattr__(self, "bounding_policy", BoundingPolicy(self.bounding_policy))
        if self.bounding_box is not None:
            lo, hi = self.bounding_box
            object.__setattr__(self, "bounding_box",
                               (tuple(map(float, lo)), tuple(map(float, hi))))
        if self.bounding_policy is BoundingPolicy.USER and self.bounding_box is None:
            raise ConfigError("the user bounding policy needs a bounding_box")
        if self.expansion < 0:
            raise ConfigError("expansion must be non-negative")


ScorerLike = Union[Scorer, ScorerKind, str]


def as_scorer(s: ScorerLike) -> Scorer:
    return s if isinstance(s, Scorer) else Scorer(kind=ScorerKind(s))


@lru_cache(maxsize=4096)
def harmonic(k: int) -> float:
    """k-th harmonic number; exact summation up to 10**6, asymptotic beyond."""
    if k <= 0:
        return 0.0
    if k <= EXACT_HARMONIC_LIMIT:
        return math.fsum(1.0 / i for i in range(1, k + 1))
    return math.log(k) + EULER_GAMMA


@lru_cache(maxsize=4096)
def c_factor(m: int) -> float:
    """Average path length of an unsuccessful search in a BST of ``m`` keys."""
    if m < 1:
        raise DomainError(f"c_factor needs m >= 1, got {m}")
    if m == 1:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / m


def _depth_table(tree: IsolationTree, strict: bool) -> np.ndarray:
    """Depth score of every node (only leaf entries are meaningful)."""
    psi = tree.subsample_size
    table = np.zeros(tree.n_nodes)
    if psi == 1:
        warnings.warn("tree fitted on a single point; depth scores are all 0",
                      RuntimeWarning, stacklevel=3)
        return table
    denom = c_factor(psi)
    for i in tree.leaf_nodes:
        d = float(tree.depth[i])
        if strict:
            table[i] = d / denom
        else:
            table[i] = (d + c_factor(int(tree.count[i]))) / denom
    return table


def depth_score(tree: IsolationTree, x, strict_paper_depth: bool = False) -> float:
    """``(depth + c(count)) / c(psi)`` for the leaf holding ``x``."""
    leaf = locate_leaf(tree, x)
    psi = tree.subsample_size
    if psi == 1:
        warnings.warn("tree fitted on a single point; depth score is 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    if strict_paper_depth:
        return float(leaf.depth) / c_factor(psi)
    return (float(leaf.depth) + c_factor(leaf.count)) / c_factor(psi)


def floor_extents(lower: np.ndarray, upper: np.ndarray):
    """Widen zero-width dimensions of a bounding box to ``EPS_VOL`` scale.

    Returns ``(lower, upper, eps)`` where ``eps`` is the extent floor used,
    relative to the widest dimension.
    """
    lower = np.array(lower, dtype=np.float64)
    upper = np.array(upper, dtype=np.float64)
    ext = upper - lower
    if not np.all(np.isfinite(ext)):
        raise DomainError("bounding box must be finite")
    widest = float(ext.max())
    eps = EPS_VOL * widest if widest > 0 else EPS_VOL
    thin = ext < eps
    if thin.any():
        mid = 0.5 * (lower[thin] + upper[thin])
        lower[thin] = mid - 0.5 * eps
        upper[thin] = mid + 0.5 * eps
    return lower, upper, eps


def expand_box(box: HyperRectangle, fraction: float) -> HyperRectangle:
    """Grow each side of ``box`` by ``fraction`` of that dimension's extent."""
    pad = fraction * box.extents
    return HyperRectangle(box.lower - pad, box.upper + pad)


def tree_bounding(tree: IsolationTree, scorer: Scorer,
                  model: Optional[ForestModel] = None) -> HyperRectangle:
    """The reference volume for ``tree`` under the scorer's policy, floored."""
    policy = scorer.bounding_policy
    if policy is BoundingPolicy.SUBSAMPLE:
        box = expand_box(tree.bounding_box, scorer.expansion)
    elif policy is BoundingPolicy.GLOBAL:
        if model is None:
            raise ConfigError("the global bounding policy needs the forest model")
        box = expand_box(model.data_bounds, scorer.expansion)
    else:
        box = HyperRectangle(*scorer.bounding_box)
    if box.dim != tree.n_features:
        raise DimensionMismatch(
            f"bounding box has {box.dim} dimensions, tree has {tree.n_features}")
    lower, upper, _ = floor_extents(box.lower, box.upper)
    return HyperRectangle(lower, upper)


def _log_volume_ratio(rect_lower, rect_upper, bounding: HyperRectangle) -> np.ndarray:
    """``log V(bounding) - log V(rect clipped to bounding)`` per row."""
    b_lo, b_hi, eps = floor_extents(bounding.lower, bounding.upper)
    clip = np.minimum(rect_upper, b_hi) - np.maximum(rect_lower, b_lo)
    clip = np.maximum(clip, eps)
    # floor both sides alike: a rounded eps-wide box must cancel exactly
    ext = np.maximum(b_hi - b_lo, eps)
    return np.sum(np.log(ext) - np.log(clip), axis=-1)


def _volume_from_log(count, total, log_ratio):
    return (np.asarray(count, dtype=np.float64) / total) * np.exp(np.minimum(log_ratio, _MAX_LOG))


def volume_score(tree: IsolationTree, x, bounding: HyperRectangle,
                 total_count: Optional[int] = None) -> float:
    """Leaf frequency times the inverse relative volume of the clipped leaf.

    ``total_count`` defaults to the tree's subsample size. The result is at
    least ``1 / total_count`` because a clipped leaf never exceeds the
    bounding box, and it is capped below float overflow.
    """
    leaf = locate_leaf(tree, x)
    if bounding.dim != tree.n_features:
        raise DimensionMismatch("bounding box and tree differ in dimension")
    psi = tree.subsample_size if total_count is None else int(total_count)
    log_ratio = _log_volume_ratio(leaf.rect.lower, leaf.rect.upper, bounding)
    return float(_volume_from_log(leaf.count, psi, log_ratio))


def _volume_table(tree: IsolationTree, bounding: HyperRectangle) -> np.ndarray:
    table = np.ones(tree.n_nodes)
    leaves = tree.leaf_nodes
    log_ratio = _log_volume_ratio(tree.lower[leaves], tree.upper[leaves], bounding)
    table[leaves] = _volume_from_log(tree.count[leaves], tree.subsample_size, log_ratio)
    return table


def score_tables(model: ForestModel, scorer: ScorerLike) -> np.ndarray:
    """Per-tree, per-node score tables padded to ``(n_estimators, max_nodes)``."""
    scorer = as_scorer(scorer)
    cache = model.__dict__.setdefault("_score_tables", {})
    if scorer in cache:
        return cache[scorer]
    width = max(t.n_nodes for t in model.trees)
    out = np.zeros((model.n_estimators, width))
    with warnings.catch_warnings():
        warnings.simplefilter("once", RuntimeWarning)
        for i, tree in enumerate(model.trees):
            if scorer.kind is ScorerKind.DEPTH:
                table = _depth_table(tree, scorer.strict_paper_depth)
            else:
                table = _volume_table(tree, tree_bounding(tree, scorer, model))
            out[i, :tree.n_nodes] = table
    out.flags.writeable = False
    cache[scorer] = out
    return out


def score_matrix(model: ForestModel, X, scorer: ScorerLike = ScorerKind.DEPTH) -> np.ndarray:
    """Per-estimator scores of every row of ``X``, shape ``(N, n_estimators)``."""
    tables = score_tables(model, scorer)
    leaves = model.leaf_ids(X)
    return tables[np.arange(model.n_estimators), leaves]


def score_vector(model: ForestModel, x, scorer: ScorerLike = ScorerKind.DEPTH) -> np.ndarray:
    """Per-estimator scores of a single point, length ``n_estimators``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("score_vector takes a single point")
    return score_matrix(model, as_matrix(x, model.n_features), scorer)[0]
