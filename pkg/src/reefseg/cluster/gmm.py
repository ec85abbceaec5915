"""Gaussian mixture fitting by expectation-maximization.

Full covariance only. The E-step works in log space with a log-sum-exp
normalization and Cholesky-factored densities; the M-step re-adds the
diagonal regularization floor every pass, so each covariance keeps its
smallest eigenvalue at or above the floor.

Initialization comes from k-means rather than random draws: means are
the k-means centroids, weights the cluster fractions, and covariances
the within-cluster scatter. That removes one seed-sensitivity axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError
from ..prep import SampleMatrix
from .kmeans import KMeansConfig, kmeans_fit


@dataclass
class GmmConfig:
    max_iter: int = 200
    tol: float = 1e-6  # stop when mean per-sample log-likelihood gains less
    reg: float = 1e-6  # diagonal added to every covariance each M-step
    seed: int = 0
    covariance: str = "full"


@dataclass
class GmmModel:
    k: int
    means: np.ndarray  # (k, d)
    covariances: np.ndarray  # (k, d, d)
    weights: np.ndarray  # (k,)
    log_likelihood: float
    iterations: int
    ll_history: list[float] = field(default_factory=list)


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True)))[:, 0]


def _log_gaussian(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """log N(x | mean, cov) for every row of x, via Cholesky."""
    d = x.shape[1]
    chol = np.linalg.cholesky(cov)
    diff = (x - mean).T  # (d, n)
    solved = np.linalg.solve(chol, diff)  # chol^-1 (x - mean)
    maha = (solved**2).sum(axis=0)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)


def _weighted_log_densities(x, means, covs, weights) -> np.ndarray:
    """(n, k) matrix of log pi_k + log N(x | mu_k, Sigma_k)."""
    n, k = x.shape[0], means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        out[:, j] = np.log(weights[j]) + _log_gaussian(x, means[j], covs[j])
    return out


def _init_from_kmeans(m: SampleMatrix, k: int, cfg: GmmConfig):
    km, labels = kmeans_fit(m, k, KMeansConfig(seed=cfg.seed))
    x = m.values
    d = m.d
    means = km.centroids.copy()
    weights = np.bincount(labels, minlength=k) / m.n
    covs = np.empty((k, d, d))
    eye = np.eye(d)
    for j in range(k):
        members = x[labels == j]
        if members.shape[0] == 0:
            covs[j] = eye * cfg.reg
            continue
        diff = members - members.mean(axis=0)
        scatter = diff.T @ diff / members.shape[0]
        covs[j] = 0.5 * (scatter + scatter.T) + eye * cfg.reg
    # Guard against k-means leaving a zero-weight component.
    weights = np.maximum(weights, 1e-12)
    weights = weights / weights.sum()
    return means, covs, weights


def gmm_fit(
    m: SampleMatrix, k: int, cfg: GmmConfig | None = None
) -> tuple[GmmModel, np.ndarray, np.ndarray]:
    """Fit a k-component full-covariance mixture; returns labels too.

    Labels are the argmax responsibility per sample (ties to the lowest
    component index). The per-iteration total log-likelihood history is
    kept on the model; EM makes it non-decreasing up to float rounding.
    """
    cfg = cfg or GmmConfig()
    if cfg.covariance != "full":
        raise ValueError("only full covariance is supported")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > m.n:
        raise ValueError(f"k={k} exceeds sample count n={m.n}")
    if m.n <= m.d:
        raise ValueError(
            f"need more samples than features to estimate covariances (n={m.n}, d={m.d})"
        )
    x = m.values
    n, d = x.shape
    eye = np.eye(d)

    means, covs, weights = _init_from_kmeans(m, k, cfg)

    ll_history: list[float] = []
    resp = np.full((n, k), 1.0 / k)
    total_ll = -np.inf
    iterations = 0
    for _ in range(cfg.max_iter):
        # E-step
        weighted = _weighted_log_densities(x, means, covs, weights)
        norms = _logsumexp_rows(weighted)
        new_ll = float(norms.sum())
        if not np.isfinite(new_ll):
            raise NumericalError(
                "log-likelihood became non-finite despite regularization"
            )
        resp = np.exp(weighted - norms[:, np.newaxis])
        iterations += 1
        ll_history.append(new_ll)

        # M-step
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = nk / n
        means = (resp.T @ x) / nk[:, np.newaxis]
        for j in range(k):
            diff = x - means[j]
            scatter = (resp[:, j][:, np.newaxis] * diff).T @ diff / nk[j]
            covs[j] = 0.5 * (scatter + scatter.T) + eye * cfg.reg

        if total_ll != -np.inf and (new_ll - total_ll) / n < cfg.tol:
            total_ll = new_ll
            break
        total_ll = new_ll

    # Final E-step so responsibilities, labels and the reported
    # likelihood all match the returned parameters.
    weighted = _weighted_log_densities(x, means, covs, weights)
    norms = _logsumexp_rows(weighted)
    final_ll = float(norms.sum())
    if not np.isfinite(final_ll):
        raise NumericalError("log-likelihood became non-finite despite regularization")
    resp = np.exp(weighted - norms[:, np.newaxis])
    labels = weighted.argmax(axis=1)
    ll_history.append(final_ll)

    model = GmmModel(
        k=k,
        means=means,
        covariances=covs,
        weights=weights,
        log_likelihood=final_ll,
        iterations=iterations,
        ll_history=ll_history,
    )
    return model, labels, resp
