"""Clustering algorithms mapping a data matrix to integer labels (noise = -1)."""
from ._common import NOISE, ClusterConfig, ClusteringError, relabel_first_occurrence
from .gmm import GMMResult, gmm, gmm_fit
from .hdbscan import (HDBSCANResult, condense_tree, core_distances, hdbscan, hdbscan_fit,
                      minimum_spanning_tree, mutual_reachability)
from .kmeans import KMeansResult, kmeans, kmeans_fit
from .ward import ward, ward_linkage

ALGORITHMS = ("kmeans", "ward", "hdbscan", "gmm")


def run_clustering(algorithm: str, X, cfg: ClusterConfig):
    """Dispatch by algorithm name."""
    if algorithm == "kmeans":
        return kmeans(X, cfg)
    if algorithm == "ward":
        return ward(X, cfg.k)
    if algorithm == "hdbscan":
        return hdbscan(X, cfg)
    if algorithm == "gmm":
        return gmm(X, cfg)
    raise ValueError(f"unknown clustering algorithm {algorithm!r}; choose from {ALGORITHMS}")


__all__ = [
    "ALGORITHMS", "NOISE", "ClusterConfig", "ClusteringError", "GMMResult", "HDBSCANResult",
    "KMeansResult", "condense_tree", "core_distances", "gmm", "gmm_fit", "hdbscan", "hdbscan_fit",
    "kmeans", "kmeans_fit", "minimum_spanning_tree", "mutual_reachability",
    "relabel_first_occurrence", "run_clustering", "ward", "ward_linkage",
]
