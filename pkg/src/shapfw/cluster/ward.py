"""Ward agglomerative clustering via the nearest-neighbour chain.

Distances are kept as ``2 * merge cost`` (squared Euclidean for singletons) and
updated with the Lance-Williams recurrence. Ward linkage is reducible, so the
chain finds the same merges as greedy agglomeration; sorting them by height
(stable, ties resolved towards the smaller index pair) recovers the greedy order.
"""
from __future__ import annotations

import numba
import numpy as np
from scipy.spatial.distance import cdist

from ._common import as_matrix, check_k, relabel_first_occurrence


@numba.njit(cache=True)
def _nn_chain(D):
    n = D.shape[0]
    size = np.ones(n)
    active = np.ones(n, dtype=np.bool_)
    merges = np.empty((n - 1, 2), dtype=np.int64)
    heights = np.empty(n - 1)
    chain = np.empty(n, dtype=np.int64)
    chain_len = 0
    for step in range(n - 1):
        if chain_len == 0:
            for i in range(n):
                if active[i]:
                    chain[0] = i
                    chain_len = 1
                    break
        while True:
            a = chain[chain_len - 1]
            prev = chain[chain_len - 2] if chain_len >= 2 else -1
            best = prev
            best_d = D[a, prev] if prev >= 0 else np.inf
            for j in range(n):
                if j == a or not active[j]:
                    continue
                if D[a, j] < best_d:
                    best_d = D[a, j]
                    best = j
            if best == prev:
                break
            chain[chain_len] = best
            chain_len += 1
        a = chain[chain_len - 1]
        b = chain[chain_len - 2]
        chain_len -= 2
        if a > b:
            a, b = b, a
        merges[step, 0] = a
        merges[step, 1] = b
        heights[step] = D[a, b]
        # merged cluster lives on in slot a
        na = size[a]
        nb = size[b]
        dab = D[a, b]
        for k in range(n):
            if not active[k] or k == a or k == b:
                continue
            nk = size[k]
            d = ((na + nk) * D[a, k] + (nb + nk) * D[b, k] - nk * dab) / (na + nb + nk)
            D[a, k] = d
            D[k, a] = d
        active[b] = False
        size[a] = na + nb
    return merges, heights


def ward_linkage(X):
    """Return ``(merges, costs)`` in agglomeration order.

    ``merges[s] = (a, b)`` names each merged cluster by its smallest member index;
    ``costs[s]`` is the increase in total within-cluster sum of squares.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if n == 1:
        return np.empty((0, 2), dtype=np.int64), np.empty(0)
    D = cdist(X, X, "sqeuclidean")
    slots, heights = _nn_chain(D)
    order = np.lexsort((slots[:, 1], slots[:, 0], heights))
    # slot ids are already the smallest member index of each side
    # (the merged cluster keeps the smaller slot)
    return slots[order], heights[order] / 2.0


def _cut(merges, n, k):
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in merges[: n - k]:
        ra, rb = find(a), find(b)
        parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(i) for i in range(n)])


def ward(X, k: int) -> np.ndarray:
    """Deterministic Ward clustering into ``k`` groups, labels by first occurrence."""
    X = as_matrix(X)
    check_k(k, X.shape[0])
    merges, _ = ward_linkage(X)
    return relabel_first_occurrence(_cut(merges, X.shape[0], k))
