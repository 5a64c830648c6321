from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

NOISE = -1


class ClusteringError(ValueError):
    """Raised for invalid inputs or when an algorithm cannot produce any cluster."""


@dataclass(frozen=True)
class ClusterConfig:
    """Hyperparameters shared by the four algorithms.

    ``k`` is used by k-means, Ward and GMM; ``min_cluster_size``/``min_samples``
    by HDBSCAN (``min_samples`` defaults to ``min_cluster_size``). ``restarts`` is
    the number of seeded initializations for k-means and GMM; the run with the
    best internal objective is kept.
    """

    k: int = 2
    min_cluster_size: int = 5
    min_samples: Optional[int] = None
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-4
    restarts: int = 10
    reg_covar: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def effective_min_samples(self) -> int:
        return self.min_cluster_size if self.min_samples is None else self.min_samples


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ClusteringError(f"expected a non-empty 2-D matrix, got shape {X.shape}")
    return X


def check_k(k: int, n: int) -> None:
    if k > n:
        raise ClusteringError(f"k={k} exceeds n_samples={n}")


def relabel_first_occurrence(labels) -> np.ndarray:
    """Map non-noise labels to 0..k-1 in order of first appearance; keep -1."""
    labels = np.asarray(labels)
    out = np.full(labels.shape, NOISE, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels.tolist()):
        if lab == NOISE:
            continue
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, rows of X against rows of C."""
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)
