"""Density-based clustering with a uniform-grid neighbor index.

Classic DBSCAN semantics: a sample with at least min_pts samples
(itself included) within eps is a core point; cores within eps of each
other share a cluster; non-core samples within eps of a core join the
first cluster that reaches them in scan order; everything else is
noise (-1).

Determinism: samples are processed in row order, every neighbor list
is sorted ascending by sample index, and cluster expansion is
breadth-first, so the labeling is a pure function of (matrix, eps,
min_pts) regardless of how the grid hashes cells.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product

import numpy as np

from ..prep import SampleMatrix


@dataclass
class DbscanResult:
    labels: np.ndarray  # (n,) int64; -1 = noise
    core_flags: np.ndarray  # (n,) bool
    eps: float
    min_pts: int

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max() + 1) if self.labels.size else 0


class GridIndex:
    """Buckets samples into cells of edge eps for O(1)-ish range queries.

    A query only has to look at the 3^d cells surrounding the query
    point's cell, then filter by exact distance.
    """

    def __init__(self, x: np.ndarray, eps: float):
        if eps <= 0:
            raise ValueError("eps must be > 0")
        self.x = np.asarray(x, dtype=np.float64)
        self.eps = float(eps)
        self.d = self.x.shape[1]
        cells = np.floor(self.x / self.eps).astype(np.int64)
        buckets: dict[tuple[int, ...], list[int]] = {}
        for i, key in enumerate(map(tuple, cells)):
            buckets.setdefault(key, []).append(i)
        self._buckets = {k: np.array(v, dtype=np.int64) for k, v in buckets.items()}
        self._offsets = list(product((-1, 0, 1), repeat=self.d))

    def query(self, point: np.ndarray, eps: float) -> np.ndarray:
        """Indices of samples within Euclidean eps of point, ascending."""
        point = np.asarray(point, dtype=np.float64)
        if point.shape != (self.d,):
            raise ValueError(f"query point must have dimension {self.d}")
        home = tuple(np.floor(point / self.eps).astype(np.int64))
        chunks = []
        for off in self._offsets:
            key = tuple(h + o for h, o in zip(home, off))
            hit = self._buckets.get(key)
            if hit is not None:
                chunks.append(hit)
        if not chunks:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(chunks)
        diff = self.x[cand] - point
        keep = (diff * diff).sum(axis=1) <= eps * eps
        out = cand[keep]
        out.sort()
        return out


def grid_index_query(index: GridIndex, point: np.ndarray, eps: float) -> np.ndarray:
    """Range query against a prebuilt index (cell edge must equal eps)."""
    return index.query(point, eps)


def dbscan_fit(m: SampleMatrix, eps: float, min_pts: int) -> DbscanResult:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    x = m.values
    n = x.shape[0]
    index = GridIndex(x, eps)

    labels = np.full(n, -1, dtype=np.int64)
    core = np.zeros(n, dtype=bool)
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        neighbors = index.query(x[i], eps)
        if neighbors.size < min_pts:
            continue  # provisional noise; a later cluster may still claim it
        core[i] = True
        labels[i] = cluster
        seeds = deque(int(j) for j in neighbors if j != i)
        while seeds:
            j = seeds.popleft()
            if labels[j] == -1:
                labels[j] = cluster
            if visited[j]:
                continue
            visited[j] = True
            labels[j] = cluster
            more = index.query(x[j], eps)
            if more.size >= min_pts:
                core[j] = True
                seeds.extend(int(q) for q in more if q != j)
        cluster += 1
    return DbscanResult(labels, core, float(eps), int(min_pts))


def _knee_of_sorted(values: np.ndarray) -> int:
    """Index of the max perpendicular distance to the first-last chord."""
    n = values.size
    xs = np.linspace(0.0, 1.0, n)
    span = values[-1] - values[0]
    ys = (values - values[0]) / span if span != 0 else np.zeros(n)
    # Chord from (0, ys[0]) to (1, ys[-1]) on normalized axes.
    vx, vy = 1.0, ys[-1] - ys[0]
    norm = np.hypot(vx, vy)
    dist = np.abs(vx * (ys - ys[0]) - vy * xs) / norm
    return int(dist.argmax())


def suggest_dbscan_params(
    m: SampleMatrix, seed: int = 0, subsample: int = 10_000
) -> tuple[float, int]:
    """Data-driven (eps, min_pts) defaults.

    min_pts = 2*d; eps is read off the knee of the sorted
    (min_pts - 1)-nearest-neighbor distance curve, computed on a
    subsample to stay cheap on full rasters.
    """
    min_pts = 2 * m.d
    x = m.values
    if x.shape[0] > subsample:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(x.shape[0], size=subsample, replace=False))
        x = x[pick]
    nn_k = max(min_pts - 1, 1)
    dists = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        diff = x - x[i]
        d2 = (diff * diff).sum(axis=1)
        d2.sort()
        dists[i] = np.sqrt(d2[min(nn_k, d2.size - 1)])
    dists.sort()
    eps = float(dists[_knee_of_sorted(dists)])
    if eps <= 0:
        positive = dists[dists > 0]
        eps = float(positive[0]) if positive.size else 1e-12
    return eps, min_pts
