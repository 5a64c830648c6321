"""HDBSCAN with excess-of-mass cluster extraction.

Core distances -> mutual-reachability graph -> minimum spanning tree (dense
Prim) -> single-linkage hierarchy -> condensed tree -> EOM selection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._common import NOISE, ClusterConfig, ClusteringError, as_matrix, relabel_first_occurrence


@dataclass
class HDBSCANResult:
    labels: np.ndarray
    mst: np.ndarray  # (n-1, 3): i, j, weight, sorted by weight
    condensed: np.ndarray  # structured: parent, child, lambda_val, child_size
    stability: dict
    selected: list


CONDENSED_DTYPE = np.dtype(
    [("parent", np.int64), ("child", np.int64), ("lambda_val", np.float64), ("child_size", np.int64)]
)


def core_distances(D: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the ``min_samples``-th nearest neighbour, counting the point itself."""
    kth = min(min_samples, D.shape[0]) - 1
    return np.partition(D, kth, axis=1)[:, kth]


def mutual_reachability(D: np.ndarray, min_samples: int) -> np.ndarray:
    core = core_distances(D, min_samples)
    M = np.maximum(D, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(M, 0.0)
    return M


def minimum_spanning_tree(M: np.ndarray) -> np.ndarray:
    """Dense Prim from vertex 0; ties go to the lowest vertex index."""
    n = M.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    source = np.zeros(n, dtype=np.int64)
    edges = np.empty((n - 1, 3))
    current = 0
    in_tree[0] = True
    for e in range(n - 1):
        row = M[current]
        closer = (~in_tree) & (row < best)
        best[closer] = row[closer]
        source[closer] = current
        candidates = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(candidates))
        edges[e] = (source[nxt], nxt, best[nxt])
        in_tree[nxt] = True
        current = nxt
    order = np.argsort(edges[:, 2], kind="stable")
    return edges[order]


def single_linkage(mst: np.ndarray, n: int) -> np.ndarray:
    """Convert sorted MST edges into a scipy-style linkage (left, right, dist, size)."""
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    Z = np.empty((n - 1, 4))
    for s, (i, j, w) in enumerate(mst):
        a, b = find(int(i)), find(int(j))
        new = n + s
        parent[a] = parent[b] = new
        size[new] = size[a] + size[b]
        Z[s] = (a, b, w, size[new])
    return Z


def _leaves(Z, n, node):
    out, stack = [], [node]
    while stack:
        x = stack.pop()
        if x < n:
            out.append(x)
        else:
            stack.extend((int(Z[x - n, 1]), int(Z[x - n, 0])))
    return out


def condense_tree(Z: np.ndarray, n: int, min_cluster_size: int) -> np.ndarray:
    root = 2 * n - 2
    # zero-length edges (duplicate points) would give infinite lambda
    floor = 1e-12 * max(float(Z[:, 2].max()), 1.0) if len(Z) else 1.0
    relabel = {root: n}
    next_label = n + 1
    rows = []
    stack = [root]
    while stack:
        node = stack.pop()
        left, right, dist = int(Z[node - n, 0]), int(Z[node - n, 1]), Z[node - n, 2]
        lam = 1.0 / max(dist, floor)
        ls = 1 if left < n else int(Z[left - n, 3])
        rs = 1 if right < n else int(Z[right - n, 3])
        parent = relabel[node]
        big_l, big_r = ls >= min_cluster_size, rs >= min_cluster_size
        if big_l and big_r:
            for child, csize in ((left, ls), (right, rs)):
                relabel[child] = next_label
                rows.append((parent, next_label, lam, csize))
                next_label += 1
                stack.append(child)
        else:
            for child, csize, big in ((left, ls, big_l), (right, rs, big_r)):
                if big:
                    relabel[child] = parent
                    stack.append(child)
                elif child < n:
                    rows.append((parent, child, lam, 1))
                else:
                    for p in _leaves(Z, n, child):
                        rows.append((parent, p, lam, 1))
    # children must be emitted depth-first for later passes; stack order gives that
    return np.array(rows, dtype=CONDENSED_DTYPE)


def compute_stability(condensed: np.ndarray) -> dict:
    parents = condensed["parent"]
    root = int(parents.min())
    birth = {root: 0.0}
    for row in condensed:
        if row["child_size"] > 1:
            birth[int(row["child"])] = float(row["lambda_val"])
    stability = {c: 0.0 for c in birth}
    for row in condensed:
        p = int(row["parent"])
        stability[p] += (float(row["lambda_val"]) - birth[p]) * int(row["child_size"])
    return stability


def select_clusters_eom(condensed: np.ndarray, stability: dict) -> list:
    root = int(condensed["parent"].min())
    cluster_rows = condensed[condensed["child_size"] > 1]
    children = {}
    for row in cluster_rows:
        children.setdefault(int(row["parent"]), []).append(int(row["child"]))
    stab = dict(stability)
    is_selected = {c: True for c in stab if c != root}
    # larger labels are always created after their parents
    for node in sorted(stab, reverse=True):
        if node == root:
            continue
        kids = children.get(node, [])
        subtree = sum(stab[c] for c in kids)
        if kids and subtree > stab[node]:
            stab[node] = subtree
            is_selected[node] = False
        else:
            stack = list(kids)
            while stack:
                c = stack.pop()
                is_selected[c] = False
                stack.extend(children.get(c, []))
    return sorted(c for c, sel in is_selected.items() if sel)


def _label_points(condensed: np.ndarray, selected: list, n: int) -> np.ndarray:
    parent_of = {}
    for row in condensed:
        parent_of[int(row["child"])] = int(row["parent"])
    chosen = set(selected)
    labels = np.full(n, NOISE, dtype=np.int64)
    cache = {}
    for p in range(n):
        node, trail = parent_of.get(p), []
        found = NOISE
        while node is not None:
            if node in cache:
                found = cache[node]
                break
            trail.append(node)
            if node in chosen:
                found = node
                break
            node = parent_of.get(node)
        for t in trail:
            cache[t] = found
        labels[p] = found
    return labels


def _single_cluster_labels(condensed: np.ndarray, n: int) -> np.ndarray:
    """Fallback when the root never splits into two clusters of at least min_cluster_size.

    The root becomes the only cluster; points that persist to its final lambda are
    members and everything that fell out earlier is noise.
    """
    labels = np.full(n, NOISE, dtype=np.int64)
    points = condensed[condensed["child"] < n]
    if len(points) == 0:
        return labels
    top = points["lambda_val"].max()
    labels[points["child"][points["lambda_val"] >= top]] = 0
    return labels


def hdbscan_fit(X, cfg: ClusterConfig) -> HDBSCANResult:
    X = as_matrix(X)
    n = X.shape[0]
    if n < cfg.min_cluster_size:
        raise ClusteringError(f"n_samples={n} < min_cluster_size={cfg.min_cluster_size}")
    D = cdist(X, X)
    M = mutual_reachability(D, cfg.effective_min_samples)
    mst = minimum_spanning_tree(M)
    Z = single_linkage(mst, n)
    condensed = condense_tree(Z, n, cfg.min_cluster_size)
    stability = compute_stability(condensed)
    selected = select_clusters_eom(condensed, stability)
    if selected:
        raw = _label_points(condensed, selected, n)
    else:
        raw = _single_cluster_labels(condensed, n)
    if np.all(raw == NOISE):
        raise ClusteringError("HDBSCAN found no stable cluster; every point is noise")
    labels = relabel_first_occurrence(raw)
    return HDBSCANResult(labels, mst, condensed, stability, selected)


def hdbscan(X, cfg: ClusterConfig) -> np.ndarray:
    return hdbscan_fit(X, cfg).labels
