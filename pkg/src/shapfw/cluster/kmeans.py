"""Lloyd's k-means with k-means++ seeding and seeded restarts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import ClusterConfig, as_matrix, check_k, relabel_first_occurrence, sq_distances


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    history: list  # objective after each assignment step


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = sq_distances(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a center
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        closest = np.minimum(closest, sq_distances(X, centers[c : c + 1])[:, 0])
    return centers


def _lloyd(X, centers, max_iter, tol):
    k = centers.shape[0]
    history = []
    labels = None
    for it in range(1, max_iter + 1):
        d2 = sq_distances(X, centers)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(X.shape[0]), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        new_centers = centers.copy()
        for c in range(k):
            members = X[labels == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        empty = [c for c in range(k) if not np.any(labels == c)]
        if empty:
            # reseed at the point farthest from its own centroid
            own = sq_distances(X, new_centers)[np.arange(X.shape[0]), labels]
            for c in empty:
                far = int(np.argmax(own))
                new_centers[c] = X[far]
                own[far] = -1.0
        shift = float(((new_centers - centers) ** 2).sum())
        centers = new_centers
        if shift <= tol * tol and not empty:
            d2 = sq_distances(X, centers)
            final = d2.argmin(axis=1)
            history.append(float(d2[np.arange(X.shape[0]), final].sum()))
            labels = final
            break
    return labels, centers, history, it


def kmeans_fit(X, cfg: ClusterConfig) -> KMeansResult:
    """Best-of-``cfg.restarts`` Lloyd runs, ranked by within-cluster SSQ."""
    X = as_matrix(X)
    check_k(cfg.k, X.shape[0])
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best = None
    for child in children:
        rng = np.random.default_rng(child)
        centers = kmeans_plusplus(X, cfg.k, rng)
        labels, centers, history, n_iter = _lloyd(X, centers, cfg.max_iter, cfg.tol)
        inertia = history[-1]
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels, centers, inertia, n_iter, history)
    return best


def kmeans(X, cfg: ClusterConfig) -> np.ndarray:
    return relabel_first_occurrence(kmeans_fit(X, cfg).labels)
