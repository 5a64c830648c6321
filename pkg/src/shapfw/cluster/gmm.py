"""Full-covariance Gaussian mixture fitted by EM."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.special import logsumexp

from ._common import ClusterConfig, ClusteringError, as_matrix, check_k, relabel_first_occurrence
from .kmeans import kmeans_fit

GMM_MAX_ITER = 100
GMM_TOL = 1e-3


@dataclass
class GMMResult:
    labels: np.ndarray
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float  # mean per-sample
    history: list  # mean log-likelihood before each M-step, then the final value
    converged: bool


def _estimate(X, resp, reg):
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    means = resp.T @ X / nk[:, None]
    d = X.shape[1]
    covs = np.empty((len(nk), d, d))
    for c in range(len(nk)):
        diff = X - means[c]
        covs[c] = (resp[:, c, None] * diff).T @ diff / nk[c]
        covs[c].flat[:: d + 1] += reg
    return nk / X.shape[0], means, covs


def _log_prob(X, weights, means, covs):
    n, d = X.shape
    out = np.empty((n, len(weights)))
    for c in range(len(weights)):
        try:
            L = cholesky(covs[c], lower=True)
        except LinAlgError:
            raise ClusteringError(f"covariance of component {c} is singular after regularization") from None
        z = solve_triangular(L, (X - means[c]).T, lower=True)
        log_det = 2.0 * np.log(np.diag(L)).sum()
        out[:, c] = -0.5 * (d * np.log(2 * np.pi) + log_det + (z**2).sum(axis=0)) + np.log(weights[c])
    return out


def _em(X, resp, reg, max_iter, tol):
    history = []
    converged = False
    weights, means, covs = _estimate(X, resp, reg)
    for _ in range(max_iter):
        log_p = _log_prob(X, weights, means, covs)
        norm = logsumexp(log_p, axis=1)
        ll = float(norm.mean())
        history.append(ll)
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break
        resp = np.exp(log_p - norm[:, None])
        weights, means, covs = _estimate(X, resp, reg)
    else:
        log_p = _log_prob(X, weights, means, covs)
        norm = logsumexp(log_p, axis=1)
        history.append(float(norm.mean()))
    return log_p, weights, means, covs, history, converged


def gmm_fit(X, cfg: ClusterConfig, max_iter: int = GMM_MAX_ITER, tol: float = GMM_TOL,
            restarts: int = 1) -> GMMResult:
    """EM from a seeded k-means partition; with ``restarts > 1`` keep the best likelihood."""
    X = as_matrix(X)
    n = X.shape[0]
    check_k(cfg.k, n)
    best = None
    for r, child in enumerate(np.random.SeedSequence(cfg.seed).spawn(restarts)):
        seed = cfg.seed if r == 0 else int(child.generate_state(1, np.uint64)[0])
        km_cfg = ClusterConfig(k=cfg.k, seed=seed, restarts=cfg.restarts, max_iter=cfg.max_iter, tol=cfg.tol)
        km = kmeans_fit(X, km_cfg)
        resp = np.zeros((n, cfg.k))
        resp[np.arange(n), km.labels] = 1.0
        log_p, weights, means, covs, history, converged = _em(X, resp, cfg.reg_covar, max_iter, tol)
        if best is None or history[-1] > best.log_likelihood:
            labels = log_p.argmax(axis=1)
            best = GMMResult(labels, weights, means, covs, history[-1], history, converged)
    return best


def gmm(X, cfg: ClusterConfig) -> np.ndarray:
    return relabel_first_occurrence(gmm_fit(X, cfg).labels)
