"""External (ARI, NMI) and internal (Silhouette, Calinski-Harabasz) clustering scores."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .cluster import NOISE


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # rows: true labels, columns: predicted labels

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "ContingencyTable":
        y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
        if y_true.shape != y_pred.shape or y_true.ndim != 1:
            raise MetricError("label vectors must be 1-D and of equal length")
        _, t = np.unique(y_true, return_inverse=True)
        _, p = np.unique(y_pred, return_inverse=True)
        counts = np.zeros((t.max() + 1 if t.size else 0, p.max() + 1 if p.size else 0), dtype=np.int64)
        np.add.at(counts, (t, p), 1)
        return cls(counts)

    @property
    def rows(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def cols(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _pairs(x):
    x = np.asarray(x, dtype=np.int64)
    return int((x * (x - 1) // 2).sum())


def adjusted_rand_index(y_true, y_pred) -> float:
    """Hubert-Arabie ARI from the contingency table; noise (-1) is an ordinary label."""
    table = ContingencyTable.from_labels(y_true, y_pred)
    n = table.total
    if n < 2:
        raise MetricError("ARI needs at least two samples")
    index = _pairs(table.counts)
    a, b = _pairs(table.rows), _pairs(table.cols)
    total = n * (n - 1) // 2
    # integer arithmetic up to the final division keeps the result exact
    num = index * total - a * b
    den = (a + b) * total - 2 * a * b
    if den == 0:
        return 1.0
    return 2 * num / den


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def normalized_mutual_information(y_true, y_pred, average: str = "arithmetic") -> float:
    """MI between two partitions over the arithmetic (or geometric) mean entropy."""
    table = ContingencyTable.from_labels(y_true, y_pred)
    n = table.total
    if n == 0:
        raise MetricError("NMI needs at least one sample")
    h_true, h_pred = _entropy(table.rows), _entropy(table.cols)
    nz = table.counts > 0
    pij = table.counts[nz] / n
    outer = np.outer(table.rows, table.cols)[nz] / (n * n)
    mi = max(float(np.sum(pij * np.log(pij / outer))), 0.0)
    if average == "arithmetic":
        norm = 0.5 * (h_true + h_pred)
    elif average == "geometric":
        norm = np.sqrt(h_true * h_pred)
    else:
        raise ValueError(f"unknown NMI average {average!r}")
    if norm <= 0 or h_true == 0 or h_pred == 0:
        return 0.0
    return min(mi / norm, 1.0)


def _check_internal(X, labels):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if X.ndim != 2 or labels.shape != (X.shape[0],):
        raise MetricError("X must be 2-D with one label per row")
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise MetricError("internal metrics need at least two clusters")
    return X, labels, clusters


def silhouette(X, labels) -> float:
    """Mean silhouette coefficient; members of singleton clusters score 0."""
    X, labels, clusters = _check_internal(X, labels)
    n = X.shape[0]
    idx = np.searchsorted(clusters, labels)
    sizes = np.bincount(idx, minlength=len(clusters)).astype(float)
    sums = np.zeros((n, len(clusters)))
    for start in range(0, n, 1024):
        D = cdist(X[start : start + 1024], X)
        for c in range(len(clusters)):
            sums[start : start + 1024, c] = D[:, idx == c].sum(axis=1)
    own = sizes[idx]
    a = sums[np.arange(n), idx] / np.maximum(own - 1, 1)
    mean_other = sums / sizes
    mean_other[np.arange(n), idx] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def calinski_harabasz(X, labels) -> float:
    """Between/within dispersion ratio; returns ``inf`` when within-dispersion is zero."""
    X, labels, clusters = _check_internal(X, labels)
    n, k = X.shape[0], len(clusters)
    if n <= k:
        raise MetricError(f"CH needs n > k, got n={n}, k={k}")
    mean = X.mean(axis=0)
    between = within = 0.0
    for c in clusters:
        members = X[labels == c]
        mu = members.mean(axis=0)
        between += len(members) * float(((mu - mean) ** 2).sum())
        within += float(((members - mu) ** 2).sum())
    if within == 0:
        return float("inf")
    return (between / (k - 1)) / (within / (n - k))


def internal_subset(X, labels):
    """Drop HDBSCAN noise rows before Silhouette/CH."""
    labels = np.asarray(labels)
    keep = labels != NOISE
    return np.asarray(X)[keep], labels[keep]


def evaluate(X, labels, y_true=None) -> dict:
    """All four scores for one labelling; a score whose preconditions fail is ``None``."""
    out = {"ari": None, "nmi": None, "silhouette": None, "ch": None}
    if y_true is not None:
        out["ari"] = adjusted_rand_index(y_true, labels)
        out["nmi"] = normalized_mutual_information(y_true, labels)
    Xi, li = internal_subset(X, labels)
    if len(np.unique(li)) >= 2 and len(li) > len(np.unique(li)):
        out["silhouette"] = silhouette(Xi, li)
        out["ch"] = calinski_harabasz(Xi, li)
    return out
