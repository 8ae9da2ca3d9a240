"""CART-style regression trees grown on a subsample of the training rows.

Trees are stored as flat node arrays so the fit and predict kernels can be
compiled with numba and run without the GIL; the ensemble builder fits
thousands of small trees per test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .errors import DomainError

_LEAF = -1


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``features`` (n x d) and response vector ``response`` (n)."""

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple[str, ...] = field(default=())
    response_name: str = "y"

    def __post_init__(self):
        x = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.response, dtype=np.float64)
        if x.ndim != 2:
            raise DomainError(f"features must be 2-d, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DomainError(f"response shape {y.shape} does not match {x.shape[0]} rows")
        if x.shape[0] < 1:
            raise DomainError("dataset has no rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("dataset contains missing or non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{i + 1}" for i in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DomainError(f"{len(names)} feature names for {x.shape[1]} features")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class TreeConfig:
    """Tree-growing rules.

    A node is split only if it holds at least ``2 * min_node_size`` rows, it is
    shallower than ``max_depth`` (``None`` = unlimited) and the best split
    lowers the node SSE by more than ``min_split_improvement``.  Both children
    must keep ``min_node_size`` rows.  ``max_features`` draws a random feature
    subset at every node; ``None`` searches all features.
    """

    min_node_size: int = 5
    max_depth: int | None = None
    min_split_improvement: float = 0.0
    max_features: int | None = None

    def __post_init__(self):
        if self.min_node_size < 1:
            raise DomainError("min_node_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise DomainError("max_depth must be >= 0")
        if self.min_split_improvement < 0:
            raise DomainError("min_split_improvement must be nonnegative")
        if self.max_features is not None and self.max_features < 1:
            raise DomainError("max_features must be >= 1")

    def kernel_args(self, d: int) -> tuple[int, int, float, int]:
        depth = -1 if self.max_depth is None else int(self.max_depth)
        mf = d if self.max_features is None else min(int(self.max_features), d)
        return int(self.min_node_size), depth, float(self.min_split_improvement), mf


@dataclass(frozen=True)
class RegressionTree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == _LEAF))

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != _LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Predictions for each row of ``x`` (n x d)."""
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        return _predict_kernel(self.feature, self.threshold, self.left, self.right, self.value, x)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``x``."""
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        return _apply_kernel(self.feature, self.threshold, self.left, self.right, x)


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = z ^ (z >> np.uint64(31))
    return state, z


@numba.njit(cache=True, nogil=True)
def _fit_kernel(x, y, rows, min_node, max_depth, min_impr, max_features, seed):
    n_rows = rows.shape[0]
    d = x.shape[1]
    cap = 2 * n_rows + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)

    idx = rows.copy()
    buf = np.empty(n_rows, dtype=np.int64)
    vals = np.empty(n_rows, dtype=np.float64)
    ys = np.empty(n_rows, dtype=np.float64)
    feats = np.arange(d)
    state = np.uint64(seed)

    # stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_rows
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        n = end - start

        total = 0.0
        lo = np.inf
        hi = -np.inf
        for t in range(start, end):
            v = y[idx[t]]
            total += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        mean = total / n
        value[node] = mean

        if n < 2 * min_node or (max_depth >= 0 and depth >= max_depth) or hi == lo:
            continue

        sse = 0.0
        for t in range(start, end):
            r = y[idx[t]] - mean
            sse += r * r

        if max_features < d:
            # partial Fisher-Yates on a fresh permutation, then ascending order
            for q in range(d):
                feats[q] = q
            for q in range(max_features):
                state, z = _splitmix64(state)
                pick = q + np.int64(z % np.uint64(d - q))
                tmp = feats[q]
                feats[q] = feats[pick]
                feats[pick] = tmp
            chosen = np.sort(feats[:max_features])
        else:
            chosen = feats

        base = total * total / n
        best_score = -np.inf
        best_feat = -1
        best_thr = 0.0
        for fi in range(chosen.shape[0]):
            f = chosen[fi]
            for t in range(n):
                vals[t] = x[idx[start + t], f]
            order = np.argsort(vals[:n], kind="mergesort")
            for t in range(n):
                ys[t] = y[idx[start + order[t]]]
            s_left = 0.0
            for p in range(1, n):
                s_left += ys[p - 1]
                if p < min_node or n - p < min_node:
                    continue
                a = vals[order[p - 1]]
                b = vals[order[p]]
                if not a < b:
                    continue
                s_right = total - s_left
                score = s_left * s_left / p + s_right * s_right / (n - p)
                if score > best_score:
                    best_score = score
                    best_feat = f
                    thr = 0.5 * (a + b)
                    if not thr < b:
                        thr = a
                    best_thr = thr

        if best_feat < 0:
            continue
        improvement = best_score - base
        if not (improvement > min_impr and improvement > 1e-12 * sse):
            continue

        # stable partition of idx[start:end]
        n_left = 0
        for t in range(start, end):
            if x[idx[t], best_feat] <= best_thr:
                buf[n_left] = idx[t]
                n_left += 1
        k = n_left
        for t in range(start, end):
            if not x[idx[t], best_feat] <= best_thr:
                buf[k] = idx[t]
                k += 1
        for t in range(n):
            idx[start + t] = buf[t]

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lchild
        right[node] = rchild
        # right first so the left subtree is expanded first
        stack[top, 0] = rchild
        stack[top, 1] = start + n_left
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lchild
        stack[top, 1] = start
        stack[top, 2] = start + n_left
        stack[top, 3] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@numba.njit(cache=True, nogil=True)
def _apply_kernel(feature, threshold, left, right, xq):
    out = np.empty(xq.shape[0], dtype=np.int64)
    for i in range(xq.shape[0]):
        node = 0
        while feature[node] != -1:
            if xq[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@numba.njit(cache=True, nogil=True)
def _predict_kernel(feature, threshold, left, right, value, xq):
    leaves = _apply_kernel(feature, threshold, left, right, xq)
    out = np.empty(xq.shape[0], dtype=np.float64)
    for i in range(xq.shape[0]):
        out[i] = value[leaves[i]]
    return out


@numba.njit(cache=True, nogil=True)
def _fit_predict_batch(x, y, row_matrix, xq, min_node, max_depth, min_impr, max_features, seeds):
    n_trees = row_matrix.shape[0]
    out = np.empty((n_trees, xq.shape[0]), dtype=np.float64)
    for t in range(n_trees):
        feature, threshold, left, right, value = _fit_kernel(
            x, y, row_matrix[t], min_node, max_depth, min_impr, max_features, seeds[t]
        )
        out[t] = _predict_kernel(feature, threshold, left, right, value, xq)
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _check_rows(rows: Sequence[int] | np.ndarray, n: int) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if rows.ndim != 1 or rows.size == 0:
        raise DomainError("row subset must be a nonempty 1-d index array")
    if rows.min() < 0 or rows.max() >= n:
        raise DomainError(f"row indices out of range for {n} rows")
    return rows


def fit_tree(data: Dataset, rows=None, config: TreeConfig | None = None, seed: int = 0) -> RegressionTree:
    """Grow a regression tree on ``data`` restricted to ``rows`` (all rows if None).

    Splits are searched exhaustively over midpoints of consecutive distinct
    values; ties go to the lowest feature index, then the lowest threshold.
    ``seed`` only matters when ``config.max_features`` is set.
    """
    config = config or TreeConfig()
    rows = np.arange(data.n) if rows is None else rows
    rows = _check_rows(rows, data.n)
    arrays = _fit_kernel(
        data.features, data.response, rows, *config.kernel_args(data.d), np.uint64(seed)
    )
    return RegressionTree(*arrays)


def predict_tree(tree: RegressionTree, x) -> float:
    """Route a single feature vector through ``tree`` (left iff value <= threshold)."""
    return float(tree.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def fit_predict_many(
    data: Dataset,
    row_matrix: np.ndarray,
    points: np.ndarray,
    config: TreeConfig | None = None,
    seeds: np.ndarray | None = None,
) -> np.ndarray:
    """Fit one tree per row of ``row_matrix`` and predict each at ``points``.

    Returns a ``(n_trees, n_points)`` array.  Equivalent to calling
    :func:`fit_tree` then :meth:`RegressionTree.predict` per subsample.
    """
    config = config or TreeConfig()
    row_matrix = np.ascontiguousarray(row_matrix, dtype=np.int64)
    if row_matrix.ndim != 2 or row_matrix.shape[1] == 0:
        raise DomainError("row_matrix must be 2-d with at least one column")
    if row_matrix.min() < 0 or row_matrix.max() >= data.n:
        raise DomainError(f"row indices out of range for {data.n} rows")
    if seeds is None:
        seeds = np.zeros(row_matrix.shape[0], dtype=np.uint64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    return _fit_predict_batch(
        data.features,
        data.response,
        row_matrix,
        points,
        *config.kernel_args(data.d),
        np.ascontiguousarray(seeds, dtype=np.uint64),
    )
