"""Agglomerative nesting over Euclidean feature space.

Every sample starts as a singleton; the closest pair of clusters merges
until one remains, giving a dendrogram that can be cut at any k.

Linkages:
  * ward (default): merge cost grows with the within-cluster sum of
    squares. Computed from cluster sizes and centroids, so no distance
    matrix is held and the configured cap (20k samples) stays cheap.
    Heights follow the Lance-Williams squared-Euclidean convention.
  * complete / average: classic Lance-Williams updates over an explicit
    distance matrix (memory grows as n^2; fine well below the cap).

Merging proceeds by nearest-neighbor chains for ward and by greedy
global-minimum search for the matrix linkages; both orders agree with
naive nearest-pair agglomeration because these linkages are reducible.
Ties always resolve toward the lowest cluster index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..prep import SampleMatrix

AGNES_DEFAULT_CAP = 20_000

_LINKAGES = ("ward", "complete", "average")


class AgnesCapError(ValueError):
    """Sample count above the configured cap; downsample first."""


@dataclass
class Dendrogram:
    """Merge list in non-decreasing height order.

    Cluster ids follow the usual convention: leaves are 0..n-1 and the
    i-th merge creates id n+i. merges[i] = (a, b, height, new_size).
    """

    n_samples: int
    merges: list[tuple[int, int, float, int]]

    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])

    def cut(self, k: int) -> np.ndarray:
        """Flat labels with exactly k clusters.

        Label ids are assigned by first occurrence in sample (row)
        order, so label 0 always contains sample 0.
        """
        n = self.n_samples
        if not 1 <= k <= n:
            raise ValueError(f"cut level k={k} out of range [1, {n}]")
        parent = list(range(n))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        members: dict[int, int] = {i: i for i in range(n)}  # cluster id -> any member
        for step in range(n - k):
            a, b, _, _ = self.merges[step]
            ra, rb = find(members[a]), find(members[b])
            parent[rb] = ra
            members[n + step] = ra
        labels = np.empty(n, dtype=np.int64)
        assigned: dict[int, int] = {}
        for i in range(n):
            root = find(i)
            if root not in assigned:
                assigned[root] = len(assigned)
            labels[i] = assigned[root]
        return labels


def _ward_dist(sizes_a: float, cent_a, sizes: np.ndarray, cents: np.ndarray) -> np.ndarray:
    """2 * ESS increase of merging cluster a with each cluster in the arrays."""
    diff = cents - cent_a
    sq = (diff * diff).sum(axis=1)
    return 2.0 * (sizes_a * sizes) / (sizes_a + sizes) * sq


def _agnes_ward(x: np.ndarray) -> list[tuple[int, int, float, int]]:
    """Nearest-neighbor-chain ward clustering; no distance matrix."""
    n = x.shape[0]
    sizes = np.ones(n)
    cents = x.copy()
    alive = np.ones(n, dtype=bool)
    ids = np.arange(n)  # dendrogram id per slot
    merges: list[tuple[int, int, float, int]] = []
    chain: list[int] = []
    inf = np.inf

    while len(merges) < n - 1:
        if not chain:
            chain.append(int(np.flatnonzero(alive)[0]))
        while True:
            a = chain[-1]
            d = _ward_dist(sizes[a], cents[a], sizes, cents)
            d[~alive] = inf
            d[a] = inf
            b = int(d.argmin())
            if len(chain) >= 2 and d[chain[-2]] == d[b]:
                b = chain[-2]  # prefer the reciprocal pair on ties
            if len(chain) >= 2 and b == chain[-2]:
                height = float(d[b])
                chain.pop()
                chain.pop()
                lo, hi = (a, b) if ids[a] < ids[b] else (b, a)
                new_size = sizes[a] + sizes[b]
                cents[lo] = (sizes[a] * cents[a] + sizes[b] * cents[b]) / new_size
                sizes[lo] = new_size
                alive[hi] = False
                merges.append((int(ids[lo]), int(ids[hi]), height, int(new_size)))
                ids[lo] = n + len(merges) - 1
                break
            chain.append(b)
    return merges


def _agnes_matrix(x: np.ndarray, linkage: str) -> list[tuple[int, int, float, int]]:
    """Greedy global-nearest-pair merging over an explicit matrix."""
    n = x.shape[0]
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    np.fill_diagonal(dist, np.inf)

    sizes = np.ones(n)
    alive = np.ones(n, dtype=bool)
    ids = np.arange(n)
    merges: list[tuple[int, int, float, int]] = []

    # Cached per-row minimum over higher-indexed alive columns.
    def row_min(i: int) -> tuple[float, int]:
        row = dist[i, i + 1 :].copy()
        row[~alive[i + 1 :]] = np.inf
        if row.size == 0 or not np.isfinite(row.min()):
            return np.inf, -1
        j = int(row.argmin())
        return float(row[j]), i + 1 + j

    mins = np.full(n, np.inf)
    arg = np.full(n, -1, dtype=np.int64)
    for i in range(n - 1):
        mins[i], arg[i] = row_min(i)

    for _ in range(n - 1):
        i = int(mins.argmin())
        j = int(arg[i])
        height = float(mins[i])
        ni, nj = sizes[i], sizes[j]
        others = alive.copy()
        others[[i, j]] = False
        if linkage == "complete":
            new_row = np.maximum(dist[i], dist[j])
        else:  # average
            new_row = (ni * dist[i] + nj * dist[j]) / (ni + nj)
        dist[i, :] = np.where(others, new_row, np.inf)
        dist[:, i] = dist[i, :]
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        alive[j] = False
        sizes[i] = ni + nj
        lo, hi = (ids[i], ids[j]) if ids[i] < ids[j] else (ids[j], ids[i])
        merges.append((int(lo), int(hi), height, int(sizes[i])))
        ids[i] = n + len(merges) - 1
        mins[j] = np.inf
        arg[j] = -1
        # Rows whose cached minimum involved i or j must be refreshed;
        # row i itself changed entirely.
        mins[i], arg[i] = row_min(i)
        stale = np.flatnonzero((arg == i) | (arg == j))
        for s in stale:
            if alive[s] and s != i:
                mins[s], arg[s] = row_min(int(s))
        # New distances to row i may undercut cached minima of rows < i.
        before = np.flatnonzero(alive[:i])
        if before.size:
            better = dist[before, i] < mins[before]
            for s in before[better]:
                mins[s] = float(dist[s, i])
                arg[s] = i
    return merges


def _sort_merges(
    n: int, merges: list[tuple[int, int, float, int]]
) -> list[tuple[int, int, float, int]]:
    """Stable-sort merges by height and renumber internal cluster ids.

    Children always keep lower heights than their parents for the
    monotone linkages used here, so a stable sort preserves topological
    order and the renumbering below is well-defined.
    """
    order = sorted(range(len(merges)), key=lambda i: merges[i][2])
    remap: dict[int, int] = {}
    out: list[tuple[int, int, float, int]] = []
    for new_idx, old_idx in enumerate(order):
        a, b, h, s = merges[old_idx]
        a = remap.get(a, a)
        b = remap.get(b, b)
        lo, hi = (a, b) if a < b else (b, a)
        out.append((lo, hi, h, s))
        remap[n + old_idx] = n + new_idx
    return out


def agnes_fit(
    m: SampleMatrix,
    k: int,
    linkage: str = "ward",
    cap: int = AGNES_DEFAULT_CAP,
) -> tuple[Dendrogram, np.ndarray]:
    """Cluster by agglomeration and cut the tree at k."""
    if linkage not in _LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; pick one of {_LINKAGES}")
    if not 1 <= k <= m.n:
        raise ValueError(f"k={k} out of range [1, {m.n}]")
    if m.n > cap:
        raise AgnesCapError(
            f"{m.n} samples exceed the agglomeration cap of {cap}; "
            "downsample the raster first"
        )
    x = m.values
    if m.n == 1:
        return Dendrogram(1, []), np.zeros(1, dtype=np.int64)
    if linkage == "ward":
        merges = _agnes_ward(x)
    else:
        merges = _agnes_matrix(x, linkage)
    dendrogram = Dendrogram(m.n, _sort_merges(m.n, merges))
    return dendrogram, dendrogram.cut(k)
