"""Shared fixtures and independent reference implementations.

The ``naive_*`` helpers walk the nested Split/Leaf view of a tree and never
touch the flat node arrays or score tables used by the package.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from aniso.forest import HyperRectangle, IsolationTree, Leaf, Split


def naive_leaves(node, lower=None, upper=None, d=None):
    """Yield ``(leaf, lower, upper)`` with rectangles rebuilt from the split path."""
    if lower is None:
        lower, upper = [-math.inf] * d, [math.inf] * d
    if isinstance(node, Leaf):
        yield node, list(lower), list(upper)
        return
    lu = list(upper)
    lu[node.feature] = node.threshold
    rl = list(lower)
    rl[node.feature] = node.threshold
    yield from naive_leaves(node.left, lower, lu, d)
    yield from naive_leaves(node.right, rl, upper, d)


def naive_descend(node, x):
    while isinstance(node, Split):
        node = node.left if x[node.feature] < node.threshold else node.right
    return node


def brute_force_leaf(tree: IsolationTree, x):
    """Scan every leaf rectangle for containment; returns all matches."""
    hits = []
    for leaf, lo, hi in naive_leaves(tree.root, d=tree.n_features):
        if all(l <= v < h for l, v, h in zip(lo, x, hi)):
            hits.append((leaf, lo, hi))
    return hits


def naive_c(m: int) -> float:
    """c(m) from an exact rational harmonic sum."""
    from fractions import Fraction
    if m == 1:
        return 0.0
    if m == 2:
        return 1.0
    h = sum(Fraction(1, i) for i in range(1, m))
    return float(2 * h - Fraction(2 * (m - 1), m))


def hand_tree_1d() -> IsolationTree:
    """Subsample {0,1,2,3}; splits at 1.5, then 0.5 (left) and 2.5 (right)."""
    leaf = lambda: Leaf(2, 1, HyperRectangle.everything(1))
    root = Split(0, 1.5, Split(0, 0.5, leaf(), leaf()), Split(0, 2.5, leaf(), leaf()))
    return IsolationTree.from_root(root, 4, HyperRectangle([0.0], [3.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's verdict for the terminal summary."""
    box = {}

    def record(name: str, ok: bool, detail: str = ""):
        box["row"] = (name, bool(ok), detail)

    yield record
    if "row" in box:
        _ACCEPTANCE.append(box["row"])
    else:
        _ACCEPTANCE.append((request.node.name, False, "no verdict recorded (error)"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
