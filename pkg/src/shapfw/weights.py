"""Filter feature-weighting methods computed against a pseudo-label partition.

All functions return a nonnegative vector summing to one. Globally constant
columns always get weight zero, and rows labelled as noise (-1) are ignored by
the label-based methods.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cluster import NOISE
from .data import normalize_weights

METHODS = ("shap", "lp", "mrmr", "pca", "ftest")


class WeightingError(ValueError):
    pass


@dataclass(frozen=True)
class WeightMethodSpec:
    """A weighting method and its parameters; ``parts`` makes it a multiplicative ensemble."""

    method: str
    p: float = 2.0
    bins: int = 10
    variance_threshold: float = 0.95
    parts: tuple = field(default=())

    def __post_init__(self):
        if self.method == "ensemble":
            if len(self.parts) < 2:
                raise ValueError("an ensemble needs at least two parts")
            if any(part.method == "ensemble" for part in self.parts):
                raise ValueError("ensembles cannot be nested")
        elif self.method not in METHODS:
            raise ValueError(f"unknown weighting method {self.method!r}")
        if self.p <= 1:
            raise ValueError("p must be > 1")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        if not 0 < self.variance_threshold <= 1:
            raise ValueError("variance_threshold must lie in (0, 1]")

    @property
    def name(self) -> str:
        if self.method == "ensemble":
            return "*".join(part.name for part in self.parts)
        return self.method

    @classmethod
    def parse(cls, text: str, **params) -> "WeightMethodSpec":
        """``"shap"`` or ``"shap*lp"`` (ensemble); ``params`` apply to every part."""
        names = [t.strip() for t in text.split("*") if t.strip()]
        if len(names) == 1:
            return cls(names[0], **params)
        return cls("ensemble", parts=tuple(cls(n, **params) for n in names), **params)


def _constant_columns(X: np.ndarray) -> np.ndarray:
    return np.ptp(X, axis=0) == 0


def _labelled(X, labels, min_clusters: int):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise WeightingError("labels must have one entry per row of X")
    keep = labels != NOISE
    clusters = np.unique(labels[keep])
    if len(clusters) < min_clusters:
        raise WeightingError(f"need at least {min_clusters} non-noise clusters, got {len(clusters)}")
    return X[keep], labels[keep], clusters


def lp_weights(X, labels, p: float = 2.0) -> np.ndarray:
    """Inverse Minkowski dispersion: w_j proportional to D_j ** (-1 / (p - 1)).

    D_j sums |x_ij - centroid_kj| ** p over clusters k and their members i.
    Features with zero dispersion take the largest finite weight present.
    """
    if p <= 1:
        raise WeightingError("p must be > 1")
    Xk, yk, clusters = _labelled(X, labels, 1)
    D = np.zeros(Xk.shape[1])
    for c in clusters:
        members = Xk[yk == c]
        D += (np.abs(members - members.mean(axis=0)) ** p).sum(axis=0)
    constant = _constant_columns(np.asarray(X, dtype=float))
    raw = np.zeros_like(D)
    positive = (D > 0) & ~constant
    raw[positive] = D[positive] ** (-1.0 / (p - 1.0))
    zero_disp = (D == 0) & ~constant
    if zero_disp.any():
        raw[zero_disp] = raw[positive].max() if positive.any() else 1.0
    return normalize_weights(raw)


def _discretize(v: np.ndarray, bins: int) -> np.ndarray:
    if np.issubdtype(v.dtype, np.integer) or np.issubdtype(v.dtype, np.bool_):
        return np.unique(v, return_inverse=True)[1]
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.int64)
    codes = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
    return np.minimum(codes, bins - 1)


def _mi_codes(a: np.ndarray, b: np.ndarray) -> float:
    n = a.size
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    pa = joint.sum(axis=1) / n
    pb = joint.sum(axis=0) / n
    nz = joint > 0
    pij = joint[nz] / n
    outer = np.outer(pa, pb)[nz]
    return max(float(np.sum(pij * np.log(pij / outer))), 0.0)


def mutual_information(a, b, bins: int = 10) -> float:
    """Histogram mutual information in nats.

    Integer-typed inputs are treated as symbols; floats are cut into ``bins``
    equal-width bins over their range.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise WeightingError("mutual_information needs two 1-D vectors of equal length")
    if a.size < 2:
        raise WeightingError("need at least two observations")
    return _mi_codes(_discretize(a, bins), _discretize(b, bins))


def mrmr_weights(X, labels, bins: int = 10) -> np.ndarray:
    """Relevance minus mean redundancy per feature, shifted to a zero minimum."""
    Xk, yk, _ = _labelled(X, labels, 2)
    m = Xk.shape[1]
    constant = _constant_columns(np.asarray(X, dtype=float))
    codes = [_discretize(Xk[:, j], bins) for j in range(m)]
    y_codes = np.unique(yk, return_inverse=True)[1]
    relevance = np.array([_mi_codes(c, y_codes) for c in codes])
    pair = np.zeros((m, m))
    for j in range(m):
        for l in range(j + 1, m):
            pair[j, l] = pair[l, j] = _mi_codes(codes[j], codes[l])
    score = relevance - pair.sum(axis=1) / m
    active = ~constant
    raw = np.zeros(m)
    if active.any():
        raw[active] = score[active] - score[active].min()
        if not raw.any():
            raw[active] = 1.0  # all scores tied: uniform over the informative columns
    return normalize_weights(raw)


def pca_weights(X, variance_threshold: float = 0.95) -> np.ndarray:
    """Explained-variance-weighted absolute loadings of the leading components."""
    if not 0 < variance_threshold <= 1:
        raise WeightingError("variance_threshold must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise WeightingError("PCA needs at least two samples")
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= 0:
        return normalize_weights(np.zeros(X.shape[1]))
    usable = evals > evals[0] * 1e-12
    evr = np.where(usable, evals, 0.0) / evals[usable].sum()
    n_keep = int(np.searchsorted(np.cumsum(evr), variance_threshold - 1e-12)) + 1
    n_keep = min(n_keep, int(usable.sum()))
    raw = np.abs(evecs[:, :n_keep]) @ evr[:n_keep]
    raw[_constant_columns(X)] = 0.0
    return normalize_weights(raw)


def f_statistics(X, labels) -> np.ndarray:
    """One-way ANOVA F per feature; inf where within-group SSQ is zero, nan if constant."""
    Xk, yk, clusters = _labelled(X, labels, 2)
    n, k = Xk.shape[0], len(clusters)
    if k >= n:
        raise WeightingError(f"degenerate grouping: {k} groups for {n} samples")
    grand = Xk.mean(axis=0)
    between = np.zeros(Xk.shape[1])
    within = np.zeros(Xk.shape[1])
    for c in clusters:
        members = Xk[yk == c]
        mu = members.mean(axis=0)
        between += len(members) * (mu - grand) ** 2
        within += ((members - mu) ** 2).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (between / (k - 1)) / (within / (n - k))


def ftest_weights(X, labels) -> np.ndarray:
    """Normalized F statistics; an infinite F becomes ten times the largest finite one."""
    F = f_statistics(X, labels)
    F = np.where(np.isnan(F), 0.0, F)  # no variation at all among labelled rows
    finite = np.isfinite(F)
    raw = np.where(finite, F, 0.0)
    if not finite.all():
        top = raw[finite].max() if finite.any() else 0.0
        raw[~finite] = 10.0 * top if top > 0 else 1.0
    constant = _constant_columns(np.asarray(X, dtype=float))
    raw[constant] = 0.0
    if not raw.any() and not constant.all():
        raw[~constant] = 1.0  # no group structure anywhere: uniform over varying columns
    return normalize_weights(raw)


def ensemble_weights(parts: Sequence) -> np.ndarray:
    """Elementwise product of two or more weight vectors, renormalized."""
    if len(parts) < 2:
        raise WeightingError("an ensemble needs at least two weight vectors")
    arrays = [np.asarray(p, dtype=float) for p in parts]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise WeightingError("ensemble parts must have equal length")
    prod = np.prod(np.vstack(arrays), axis=0)
    return normalize_weights(prod)
