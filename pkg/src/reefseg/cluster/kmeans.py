"""Lloyd's k-means with k-means++ seeding and restart selection.

The objective is the total within-cluster sum of squares: each sample's
squared Euclidean distance to its assigned centroid, summed over all
samples. Assignment ties go to the lowest cluster index, which makes
every run reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..prep import SampleMatrix


@dataclass
class KMeansConfig:
    max_iter: int = 300
    tol: float = 1e-6  # relative WCSS improvement below which a run stops
    restarts: int = 8
    seed: int = 0


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray  # (k, d)
    wcss: float
    iterations: int
    restarts_used: int


@dataclass
class LloydRun:
    centroids: np.ndarray
    labels: np.ndarray
    wcss: float
    iterations: int
    wcss_history: list[float] = field(default_factory=list)


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact per-pair squared distances, (n, k)."""
    diff = x[:, np.newaxis, :] - centroids[np.newaxis, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = _sq_dists(x, centroids)
    labels = d2.argmin(axis=1)  # argmin takes the lowest index on ties
    return labels, d2[np.arange(x.shape[0]), labels]


def _update_means(x: np.ndarray, labels: np.ndarray, k: int, old: np.ndarray) -> np.ndarray:
    centroids = old.copy()
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            centroids[j] = x[labels == j].mean(axis=0)
    empties = np.flatnonzero(counts == 0)
    if empties.size:
        # Reseed each empty cluster at the sample farthest from its
        # current centroid so k stays fixed.
        _, costs = _assign(x, centroids)
        taken: set[int] = set()
        for j in empties:
            order = np.argsort(-costs, kind="stable")
            pick = next(int(i) for i in order if int(i) not in taken)
            taken.add(pick)
            centroids[j] = x[pick]
    return centroids


def plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws of data points."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first]
    closest = ((x - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            pick = int(rng.integers(n))  # all points coincide with a centroid
        else:
            pick = int(rng.choice(n, p=closest / total))
        centroids[j] = x[pick]
        closest = np.minimum(closest, ((x - centroids[j]) ** 2).sum(axis=1))
    return centroids


def lloyd_run(
    x: np.ndarray,
    init_centroids: np.ndarray,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> LloydRun:
    """One Lloyd descent from explicit initial centroids.

    wcss_history holds the assignment cost after every iteration; it is
    non-increasing by construction. The run stops at a genuine fixed
    point (labels unchanged) or when the relative improvement drops
    below tol.
    """
    k = init_centroids.shape[0]
    centroids = np.asarray(init_centroids, dtype=np.float64).copy()
    labels, costs = _assign(x, centroids)
    wcss = float(costs.sum())
    history = [wcss]
    iterations = 0
    for _ in range(max_iter):
        centroids = _update_means(x, labels, k, centroids)
        new_labels, costs = _assign(x, centroids)
        new_wcss = float(costs.sum())
        iterations += 1
        history.append(new_wcss)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            wcss = new_wcss
            break
        improved = wcss - new_wcss
        labels, wcss = new_labels, new_wcss
        if wcss == 0.0 or (wcss > 0.0 and improved / max(history[-2], wcss) < tol):
            break
    return LloydRun(centroids, labels, wcss, iterations, history)


def kmeans_fit(
    m: SampleMatrix,
    k: int,
    cfg: KMeansConfig | None = None,
    warm_starts: Sequence[np.ndarray] = (),
) -> tuple[KMeansModel, np.ndarray]:
    """Best-of-restarts k-means.

    Runs `cfg.restarts` k-means++ initializations plus any caller-given
    warm starts (exact centroid sets, e.g. a previous k-1 solution with
    one extra centroid) and keeps the run with the lowest WCSS. Ties
    keep the earliest run.
    """
    cfg = cfg or KMeansConfig()
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > m.n:
        raise ValueError(f"k={k} exceeds sample count n={m.n}")
    x = m.values

    best: LloydRun | None = None
    runs = 0
    for r in range(max(cfg.restarts, 0)):
        rng = np.random.default_rng([cfg.seed, r])
        init = plusplus_init(x, k, rng)
        run = lloyd_run(x, init, cfg.max_iter, cfg.tol)
        runs += 1
        if best is None or run.wcss < best.wcss:
            best = run
    for init in warm_starts:
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (k, x.shape[1]):
            raise ValueError(f"warm start must have shape ({k}, {x.shape[1]})")
        run = lloyd_run(x, init, cfg.max_iter, cfg.tol)
        runs += 1
        if best is None or run.wcss < best.wcss:
            best = run
    if best is None:
        raise ValueError("no restarts configured and no warm starts given")

    model = KMeansModel(
        k=k,
        centroids=best.centroids,
        wcss=best.wcss,
        iterations=best.iterations,
        restarts_used=runs,
    )
    return model, best.labels


def wcss_of(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Recompute the objective from an explicit labeling."""
    diff = x - centroids[labels]
    return float((diff * diff).sum())
