"""Hot loops: growing one isolation tree and routing points to leaves.

Every kernel has a numba variant (scalar loops, compiled) and a numpy
variant (vectorized per node or per tree level). The public names at the
bottom pick one according to :data:`aniso._accel.USE_NUMBA`; the benchmark
imports both explicitly.

Tree arrays use a flat layout indexed by node id. ``feature[i] == -1``
marks a leaf. Node 0 is the root.
"""

from __future__ import annotations

import numpy as np

from aniso._accel import USE_NUMBA, njit


def _grow_tree_loops(points, uniforms, max_depth):
    psi, d = points.shape
    max_nodes = 2 * psi - 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    depth = np.zeros(max_nodes, np.int64)
    count = np.zeros(max_nodes, np.int64)
    lower = np.full((max_nodes, d), -np.inf)
    upper = np.full((max_nodes, d), np.inf)

    idx = np.arange(psi)
    buf = np.empty(psi, np.int64)
    lo = np.empty(d)
    hi = np.empty(d)
    splittable = np.empty(d, np.int64)
    stack_node = np.empty(max_nodes, np.int64)
    stack_start = np.empty(max_nodes, np.int64)
    stack_end = np.empty(max_nodes, np.int64)

    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = psi
    top = 1
    n_nodes = 1
    draw = 0
    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        n = end - start
        count[node] = n
        if n == 1 or depth[node] >= max_depth:
            continue

        first = idx[start]
        for j in range(d):
            lo[j] = points[first, j]
            hi[j] = points[first, j]
        for k in range(start + 1, end):
            p = idx[k]
            for j in range(d):
                v = points[p, j]
                if v < lo[j]:
                    lo[j] = v
                elif v > hi[j]:
                    hi[j] = v
        ns = 0
        for j in range(d):
            if lo[j] < hi[j]:
                splittable[ns] = j
                ns += 1
        if ns == 0:
            continue

        k = int(uniforms[draw] * ns)
        if k >= ns:
            k = ns - 1
        f = splittable[k]
        t = lo[f] + uniforms[draw + 1] * (hi[f] - lo[f])
        draw += 2
        if t <= lo[f]:
            t = hi[f]

        # stable partition; left writes never overtake the read cursor
        nl = 0
        nr = 0
        for k in range(start, end):
            p = idx[k]
            if points[p, f] < t:
                idx[start + nl] = p
                nl += 1
            else:
                buf[nr] = p
                nr += 1
        for k in range(nr):
            idx[start + nl + k] = buf[k]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = t
        left[node] = lc
        right[node] = rc
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        for j in range(d):
            lower[lc, j] = lower[node, j]
            upper[lc, j] = upper[node, j]
            lower[rc, j] = lower[node, j]
            upper[rc, j] = upper[node, j]
        upper[lc, f] = t
        lower[rc, f] = t

        stack_node[top] = rc
        stack_start[top] = start + nl
        stack_end[top] = end
        top += 1
        stack_node[top] = lc
        stack_start[top] = start
        stack_end[top] = start + nl
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], depth[:n_nodes], count[:n_nodes],
            lower[:n_nodes], upper[:n_nodes])


def grow_tree_numpy(points, uniforms, max_depth):
    """Vectorized-per-node twin of the compiled tree grower."""
    psi, d = points.shape
    max_nodes = 2 * psi - 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    depth = np.zeros(max_nodes, np.int64)
    count = np.zeros(max_nodes, np.int64)
    lower = np.full((max_nodes, d), -np.inf)
    upper = np.full((max_nodes, d), np.inf)

    idx = np.arange(psi)
    stack = [(0, 0, psi)]
    n_nodes = 1
    draw = 0
    while stack:
        node, start, end = stack.pop()
        n = end - start
        count[node] = n
        if n == 1 or depth[node] >= max_depth:
            continue
        sub = idx[start:end]
        block = points[sub]
        lo = block.min(axis=0)
        hi = block.max(axis=0)
        splittable = np.flatnonzero(lo < hi)
        ns = splittable.size
        if ns == 0:
            continue

        k = min(int(uniforms[draw] * ns), ns - 1)
        f = splittable[k]
        t = lo[f] + uniforms[draw + 1] * (hi[f] - lo[f])
        draw += 2
        if t <= lo[f]:
            t = hi[f]

        goes_left = block[:, f] < t
        nl = int(goes_left.sum())
        idx[start:end] = np.concatenate((sub[goes_left], sub[~goes_left]))

        lc, rc = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = t
        left[node] = lc
        right[node] = rc
        depth[lc] = depth[rc] = depth[node] + 1
        lower[lc] = lower[rc] = lower[node]
        upper[lc] = upper[rc] = upper[node]
        upper[lc, f] = t
        lower[rc, f] = t
        stack.append((rc, start + nl, end))
        stack.append((lc, start, start + nl))

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], depth[:n_nodes], count[:n_nodes],
            lower[:n_nodes], upper[:n_nodes])


def _descend_loops(feature, threshold, left, right, X):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def descend_numpy(feature, threshold, left, right, X):
    """Route every row of ``X`` to its leaf, one tree level per pass."""
    n = X.shape[0]
    node = np.zeros(n, np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        cur = node[active]
        f = feature[cur]
        go_left = X[active, f] < threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
        active = active[feature[node[active]] >= 0]
    return node


def _descend_forest_loops(feature, threshold, left, right, X):
    n_trees = feature.shape[0]
    n = X.shape[0]
    out = np.empty((n, n_trees), np.int64)
    for i in range(n):
        for t in range(n_trees):
            node = 0
            while feature[t, node] >= 0:
                if X[i, feature[t, node]] < threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[i, t] = node
    return out


def descend_forest_numpy(feature, threshold, left, right, X):
    """Leaf ids of shape ``(N, n_trees)`` for padded per-tree node tables."""
    out = np.empty((X.shape[0], feature.shape[0]), np.int64)
    for t in range(feature.shape[0]):
        out[:, t] = descend_numpy(feature[t], threshold[t], left[t], right[t], X)
    return out


grow_tree_numba = njit(_grow_tree_loops)
descend_numba = njit(_descend_loops)
descend_forest_numba = njit(_descend_forest_loops)

if USE_NUMBA:
    grow_tree = grow_tree_numba
    descend = descend_numba
    descend_forest = descend_forest_numba
else:
    grow_tree = grow_tree_numpy
    descend = descend_numpy
    descend_forest = descend_forest_numpy
