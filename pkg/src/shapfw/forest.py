"""Random-forest surrogate classifier (bootstrap + Gini CART).

Each tree is stored as flat arrays. ``cover`` is the bootstrap-weighted count of
training rows reaching a node and ``value`` holds class-probability vectors, which
is the layout the TreeSHAP recursion expects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np


class ForestError(ValueError):
    pass


class MalformedTreeError(ForestError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_leaf: int = 1
    features_per_split: Optional[int] = None  # None -> ceil(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    cover: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def validate(self, n_features: Optional[int] = None, atol: float = 1e-9) -> None:
        internal = np.flatnonzero(self.feature >= 0)
        if n_features is not None and np.any(self.feature >= n_features):
            raise MalformedTreeError("tree references a feature index out of range")
        for i in internal:
            l, r = self.left[i], self.right[i]
            if not (0 < l < self.n_nodes and 0 < r < self.n_nodes):
                raise MalformedTreeError(f"node {i} has invalid children")
            if abs(self.cover[i] - self.cover[l] - self.cover[r]) > atol * max(1.0, abs(self.cover[i])):
                raise MalformedTreeError(f"cover mismatch at node {i}")
            if self.cover[l] <= 0 or self.cover[r] <= 0:
                raise MalformedTreeError(f"node {i} has a child with non-positive cover")
        leaves = self.value[self.feature < 0]
        if np.any(leaves < 0) or np.any(np.abs(leaves.sum(axis=1) - 1.0) > atol):
            raise MalformedTreeError("leaf values must be probability vectors")

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.value[_apply(self.feature, self.threshold, self.left, self.right, X)]


@dataclass(frozen=True)
class Forest:
    trees: tuple
    n_classes: int
    n_features: int
    classes: np.ndarray
    params: ForestParams = field(default_factory=ForestParams)

    def predict_proba(self, X) -> np.ndarray:
        """Mean of per-tree leaf distributions; accepts a row or a matrix."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ForestError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros((X.shape[0], self.n_classes))
        for t in self.trees:
            out += t.predict_proba(X)
        out /= len(self.trees)
        return out[0] if single else out

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.predict_proba(np.atleast_2d(X)), axis=1)]


def predict_proba(f: Forest, x) -> np.ndarray:
    return f.predict_proba(x)


@numba.njit(cache=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@numba.njit(cache=True)
def _gini_split(xs, ys, ws, n_classes, min_leaf):
    """Best midpoint threshold on one feature; returns (impurity_sum, threshold, ok)."""
    order = np.argsort(xs, kind="mergesort")
    total = np.zeros(n_classes)
    for i in range(len(ys)):
        total[ys[i]] += ws[i]
    w_total = total.sum()
    left = np.zeros(n_classes)
    w_left = 0.0
    best = np.inf
    best_thr = 0.0
    found = False
    n = len(order)
    for pos in range(n - 1):
        i = order[pos]
        left[ys[i]] += ws[i]
        w_left += ws[i]
        a = xs[i]
        b = xs[order[pos + 1]]
        if b <= a:
            continue
        if pos + 1 < min_leaf or n - pos - 1 < min_leaf:
            continue
        w_right = w_total - w_left
        sq_l = 0.0
        sq_r = 0.0
        for c in range(n_classes):
            sq_l += left[c] * left[c]
            r = total[c] - left[c]
            sq_r += r * r
        # weighted child impurity: w_l*(1 - sum p_l^2) + w_r*(1 - sum p_r^2)
        imp = w_total - sq_l / w_left - sq_r / w_right
        if imp < best - 1e-12 * w_total:
            best = imp
            thr = 0.5 * (a + b)
            if thr >= b:  # adjacent floats: midpoint rounds up
                thr = a
            best_thr = thr
            found = True
    return best, best_thr, found


@numba.njit(cache=True)
def _build_tree(X, y, w, n_classes, max_depth, min_leaf, max_features, seed):
    np.random.seed(seed)
    n, m = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    cover = np.zeros(cap)
    value = np.zeros((cap, n_classes))
    # explicit stack of (node, start, end, depth) over a permutation of rows
    idx = np.arange(n)
    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        rows = idx[start:end]
        counts = np.zeros(n_classes)
        for r in rows:
            counts[y[r]] += w[r]
        wsum = counts.sum()
        cover[node] = wsum
        value[node] = counts / wsum
        pure = np.count_nonzero(counts) <= 1
        if pure or (max_depth >= 0 and depth >= max_depth) or end - start < 2 * min_leaf:
            continue
        best_imp = wsum - (counts * counts).sum() / wsum  # parent impurity * weight
        best_f = -1
        best_thr = 0.0
        perm = np.random.permutation(m)
        visited = 0
        xs = np.empty(end - start)
        ys = y[rows]
        ws = w[rows]
        for f in perm:
            if visited >= max_features and best_f >= 0:
                break
            for t in range(end - start):
                xs[t] = X[rows[t], f]
            if xs.max() <= xs.min():
                continue  # constant features do not count towards max_features
            visited += 1
            imp, thr, ok = _gini_split(xs, ys, ws, n_classes, min_leaf)
            if ok and imp < best_imp - 1e-12 * wsum:
                best_imp = imp
                best_f = f
                best_thr = thr
        if best_f < 0:
            continue
        # partition rows in place
        lo = start
        hi = end - 1
        while lo <= hi:
            if X[idx[lo], best_f] <= best_thr:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = lo
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = n_nodes
        stack[top + 1, 1] = start
        stack[top + 1, 2] = lo
        stack[top + 1, 3] = depth + 1
        top += 2
        n_nodes += 2
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            cover[:n_nodes], value[:n_nodes])


def _tree_seeds(seed: int, n_trees: int):
    return np.random.SeedSequence(seed).spawn(n_trees)


def fit_tree(X, y_codes, n_classes, params: ForestParams, seed_seq) -> Tree:
    n, m = X.shape
    rng = np.random.default_rng(seed_seq)
    if params.bootstrap:
        w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
    else:
        w = np.ones(n)
    keep = w > 0
    Xk, yk, wk = X[keep], y_codes[keep], w[keep]
    max_features = params.features_per_split or math.ceil(math.sqrt(m))
    max_depth = -1 if params.max_depth is None else params.max_depth
    inner_seed = int(rng.integers(0, 2**31 - 1))
    arrays = _build_tree(np.ascontiguousarray(Xk), yk, wk, n_classes, max_depth,
                         params.min_leaf, min(max_features, m), inner_seed)
    return Tree(*arrays)


def fit_forest(X, y, params: ForestParams = ForestParams()) -> Forest:
    """Fit ``params.n_trees`` Gini trees on seeded bootstrap samples of (X, y)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ForestError("empty training matrix")
    if y.shape != (X.shape[0],):
        raise ForestError("label vector length does not match X")
    classes, codes = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ForestError(f"need at least 2 classes to fit a surrogate, got {len(classes)}")
    codes = codes.astype(np.int64)
    trees = tuple(fit_tree(X, codes, len(classes), params, s) for s in _tree_seeds(params.seed, params.n_trees))
    return Forest(trees, len(classes), X.shape[1], classes, params)
