"""Path-dependent TreeSHAP for the surrogate forest and SHAP-based feature weights.

The recursion tracks, for every unique feature on the current root-to-node
path, the fraction of "zero" paths (feature unknown: follow covers) and "one"
paths (feature known: follow ``x``), together with the permutation weights of
all subset sizes. Extending and unwinding that weight vector costs O(depth),
so explaining one row costs O(leaves * depth^2) instead of enumerating subsets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .data import normalize_weights
from .forest import Forest, ForestError, Tree


@dataclass(frozen=True)
class ShapTensor:
    values: np.ndarray  # (n_samples, n_features, n_classes)
    base_values: np.ndarray  # (n_classes,)

    def max_local_accuracy_error(self, proba: np.ndarray) -> float:
        recon = self.base_values[None, :] + self.values.sum(axis=1)
        return float(np.max(np.abs(recon - proba))) if proba.size else 0.0


@numba.njit(cache=True)
def _extend(feat, zero, one, pw, off, depth, zero_fraction, one_fraction, feature):
    feat[off + depth] = feature
    zero[off + depth] = zero_fraction
    one[off + depth] = one_fraction
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one_fraction * pw[off + i] * (i + 1) / (depth + 1)
        pw[off + i] = zero_fraction * pw[off + i] * (depth - i) / (depth + 1)


@numba.njit(cache=True)
def _unwind(feat, zero, one, pw, off, depth, path_index):
    one_fraction = one[off + path_index]
    zero_fraction = zero[off + path_index]
    next_one = pw[off + depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[off + i]
            pw[off + i] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - pw[off + i] * zero_fraction * (depth - i) / (depth + 1)
        else:
            pw[off + i] = pw[off + i] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(path_index, depth):
        feat[off + i] = feat[off + i + 1]
        zero[off + i] = zero[off + i + 1]
        one[off + i] = one[off + i + 1]


@numba.njit(cache=True)
def _unwound_sum(zero, one, pw, off, depth, path_index, recip):
    # recip[k] == 1 / k; keeps divisions out of the innermost loop
    one_fraction = one[off + path_index]
    zero_fraction = zero[off + path_index]
    total = 0.0
    if one_fraction != 0.0:
        next_one = pw[off + depth]
        scale_one = (depth + 1) / one_fraction
        scale_zero = zero_fraction * recip[depth + 1]
        for i in range(depth - 1, -1, -1):
            tmp = next_one * scale_one * recip[i + 1]
            total += tmp
            next_one = pw[off + i] - tmp * scale_zero * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += pw[off + i] * recip[depth - i]
        total *= (depth + 1) / zero_fraction
    return total


@numba.njit(cache=True)
def _explain_row(feature, threshold, left, right, cover, value, x, phi, n_features,
                 feat, zero, one, pw, stack_i, stack_f, recip):
    # frames: (node, depth, parent_off, parent_feature) + (parent_zero, parent_one)
    top = 0
    stack_i[0, 0] = 0
    stack_i[0, 1] = 0
    stack_i[0, 2] = 0
    stack_i[0, 3] = n_features  # dummy feature heading every path
    stack_f[0, 0] = 1.0
    stack_f[0, 1] = 1.0
    top = 1
    while top > 0:
        top -= 1
        node = stack_i[top, 0]
        depth = stack_i[top, 1]
        parent_off = stack_i[top, 2]
        parent_feature = stack_i[top, 3]
        parent_zero = stack_f[top, 0]
        parent_one = stack_f[top, 1]

        # the parent's segment stays intact until both children are done:
        # descendants only write beyond it
        off = parent_off + depth
        for i in range(depth):
            feat[off + i] = feat[parent_off + i]
            zero[off + i] = zero[parent_off + i]
            one[off + i] = one[parent_off + i]
            pw[off + i] = pw[parent_off + i]
        _extend(feat, zero, one, pw, off, depth, parent_zero, parent_one, parent_feature)

        split = feature[node]
        if split < 0:
            # elements with one == 0 all contribute -(depth + 1) * sum_k pw[k] / (depth - k)
            cold_scale = 0.0
            for k in range(depth):
                cold_scale += pw[off + k] * recip[depth - k]
            cold_scale *= -(depth + 1)
            for i in range(1, depth + 1):
                if one[off + i] == 0.0:
                    scale = cold_scale
                else:
                    w = _unwound_sum(zero, one, pw, off, depth, i, recip)
                    scale = w * (one[off + i] - zero[off + i])
                f = feat[off + i]
                for c in range(value.shape[1]):
                    phi[f, c] += scale * value[node, c]
            continue

        if x[split] <= threshold[node]:
            hot = left[node]
            cold = right[node]
        else:
            hot = right[node]
            cold = left[node]
        incoming_zero = 1.0
        incoming_one = 1.0

        # a feature seen earlier on the path is unwound and re-extended below
        path_index = 0
        while path_index <= depth:
            if feat[off + path_index] == split:
                break
            path_index += 1
        if path_index != depth + 1:
            incoming_zero = zero[off + path_index]
            incoming_one = one[off + path_index]
            _unwind(feat, zero, one, pw, off, depth, path_index)
            depth -= 1

        stack_i[top, 0] = cold
        stack_i[top, 1] = depth + 1
        stack_i[top, 2] = off
        stack_i[top, 3] = split
        stack_f[top, 0] = cover[cold] / cover[node] * incoming_zero
        stack_f[top, 1] = 0.0
        stack_i[top + 1, 0] = hot
        stack_i[top + 1, 1] = depth + 1
        stack_i[top + 1, 2] = off
        stack_i[top + 1, 3] = split
        stack_f[top + 1, 0] = cover[hot] / cover[node] * incoming_zero
        stack_f[top + 1, 1] = incoming_one
        top += 2


@numba.njit(cache=True)
def _tree_shap_rows(feature, threshold, left, right, cover, value, X, n_features, max_depth, out, scale):
    # one path segment per depth level, laid out back to back
    size = (max_depth + 2) * (max_depth + 3) // 2 + max_depth + 2
    feat = np.empty(size, dtype=np.int64)
    zero = np.empty(size)
    one = np.empty(size)
    pw = np.empty(size)
    stack_i = np.empty((max_depth + 2, 4), dtype=np.int64)
    stack_f = np.empty((max_depth + 2, 2))
    phi = np.zeros((n_features + 1, value.shape[1]))
    recip = np.zeros(max_depth + 3)
    for k in range(1, max_depth + 3):
        recip[k] = 1.0 / k
    for r in range(X.shape[0]):
        phi[:, :] = 0.0
        _explain_row(feature, threshold, left, right, cover, value, X[r], phi, n_features,
                     feat, zero, one, pw, stack_i, stack_f, recip)
        for j in range(n_features):
            for c in range(value.shape[1]):
                out[r, j, c] += scale * phi[j, c]


def expected_value(tree: Tree) -> np.ndarray:
    """Cover-weighted mean of the leaf values (the tree's output with no feature known)."""
    leaves = tree.feature < 0
    weights = tree.cover[leaves] / tree.cover[0]
    return weights @ tree.value[leaves]


def _check_tree(tree: Tree, n_features: int) -> None:
    tree.validate(n_features)


def tree_shap_single(tree: Tree, x, n_features: int | None = None) -> np.ndarray:
    """SHAP values of one row for one tree, shape ``(n_features, n_classes)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a single row")
    m = x.shape[0] if n_features is None else n_features
    _check_tree(tree, m)
    out = np.zeros((1, m, tree.value.shape[1]))
    _tree_shap_rows(tree.feature, tree.threshold, tree.left, tree.right, tree.cover,
                    tree.value, x[None, :], m, tree.max_depth(), out, 1.0)
    return out[0]


def forest_shap(f: Forest, X) -> ShapTensor:
    """Per-sample, per-feature, per-class attributions averaged over the trees."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != f.n_features:
        raise ForestError(f"expected {f.n_features} features, got {X.shape[1]}")
    X = np.ascontiguousarray(X)
    values = np.zeros((X.shape[0], f.n_features, f.n_classes))
    base = np.zeros(f.n_classes)
    scale = 1.0 / len(f.trees)
    for tree in f.trees:
        _check_tree(tree, f.n_features)
        _tree_shap_rows(tree.feature, tree.threshold, tree.left, tree.right, tree.cover,
                        tree.value, X, f.n_features, tree.max_depth(), values, scale)
        base += expected_value(tree)
    return ShapTensor(values, base * scale)


def aggregate_to_weights(t: ShapTensor) -> np.ndarray:
    """Mean |SHAP| over samples and classes per feature, normalized to sum 1.

    If every attribution is zero the result is uniform.
    """
    values = np.asarray(t.values)
    if values.ndim != 3 or values.shape[0] == 0:
        raise ValueError("SHAP tensor must be (n_samples>=1, n_features, n_classes)")
    return normalize_weights(np.abs(values).mean(axis=(0, 2)))
