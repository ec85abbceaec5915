"""Model-order scoring: WCSS elbow curves, GMM BIC curves, knee finding.

The proposed k is advisory. The pipeline always honors the configured
k; these curves exist so a human can look at them and decide, which is
how the mapping loop is meant to work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster.gmm import GmmConfig, GmmModel, gmm_fit
from .cluster.kmeans import KMeansConfig, kmeans_fit
from .prep import SampleMatrix

# A knee is only reported when the best point clears this normalized
# distance from the first-last chord; below it the curve is near-linear.
KNEE_MIN_DISTANCE = 0.05


@dataclass
class SelectionCurve:
    method: str  # "wcss" | "bic"
    points: list[tuple[int, float]]  # (k, score), k strictly increasing
    proposed_k: int | None = None

    def __post_init__(self):
        ks = [k for k, _ in self.points]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("curve k values must be strictly increasing")

    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.points])

    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.points])


def detect_knee(curve: SelectionCurve) -> int | None:
    """Max-distance-to-chord knee detection.

    Both axes are normalized to [0, 1] first, which makes the answer
    invariant under affine rescaling of either axis. Returns None for
    near-linear curves (max distance < 0.05). Ties go to the smallest k.
    """
    if len(curve.points) < 3:
        raise ValueError("knee detection needs at least 3 points")
    ks = curve.ks().astype(np.float64)
    scores = curve.scores()
    xs = (ks - ks[0]) / (ks[-1] - ks[0])
    span = scores.max() - scores.min()
    if span == 0:
        return None
    ys = (scores - scores.min()) / span
    # Perpendicular distance to the chord through the first and last point.
    vx, vy = xs[-1] - xs[0], ys[-1] - ys[0]
    norm = np.hypot(vx, vy)
    dist = np.abs(vx * (ys - ys[0]) - vy * (xs - xs[0])) / norm
    best = int(dist.argmax())  # argmax returns the smallest index on ties
    if dist[best] < KNEE_MIN_DISTANCE:
        return None
    return int(ks[best])


def _propose(curve: SelectionCurve) -> int | None:
    if len(curve.points) == 1:
        return curve.points[0][0]
    if len(curve.points) < 3:
        return None
    return detect_knee(curve)


def wcss_curve(
    m: SampleMatrix,
    k_range: tuple[int, int],
    cfg: KMeansConfig | None = None,
) -> SelectionCurve:
    """Total WCSS for every k in the inclusive range.

    Each k seeds one extra restart with the previous k's solution plus
    one added centroid (the sample farthest from its assigned
    centroid), which forces the curve to be non-increasing in k.
    """
    cfg = cfg or KMeansConfig()
    k_lo, k_hi = k_range
    if k_lo < 1 or k_hi > m.n or k_lo > k_hi:
        raise ValueError(f"k range [{k_lo}, {k_hi}] invalid for n={m.n}")
    points: list[tuple[int, float]] = []
    prev_centroids = None
    prev_labels = None
    x = m.values
    for k in range(k_lo, k_hi + 1):
        warms = []
        if prev_centroids is not None and prev_centroids.shape[0] == k - 1:
            costs = ((x - prev_centroids[prev_labels]) ** 2).sum(axis=1)
            extra = x[int(costs.argmax())]
            warms.append(np.vstack([prev_centroids, extra]))
        model, labels = kmeans_fit(m, k, cfg, warm_starts=warms)
        points.append((k, model.wcss))
        prev_centroids, prev_labels = model.centroids, labels
    curve = SelectionCurve("wcss", points)
    curve.proposed_k = _propose(curve)
    return curve


def bic(model: GmmModel, m: SampleMatrix) -> float:
    """Bayesian information criterion, lower is better.

    p counts the free parameters of a full-covariance mixture:
    (k - 1) weights, k*d means, k*d*(d+1)/2 covariance entries.
    """
    if m.n == 0:
        raise ValueError("BIC needs at least one sample")
    k, d = model.k, m.d
    p = (k - 1) + k * d + k * d * (d + 1) // 2
    return p * np.log(m.n) - 2.0 * model.log_likelihood


def bic_curve(
    m: SampleMatrix,
    k_range: tuple[int, int],
    cfg: GmmConfig | None = None,
    workers: int = 1,
) -> SelectionCurve:
    """BIC of a GMM fit for every k in the inclusive range.

    Per-k fits are independent; with workers > 1 they run on a thread
    pool, and the curve is assembled in k order either way.
    """
    cfg = cfg or GmmConfig()
    k_lo, k_hi = k_range
    if k_lo < 1 or k_hi > m.n or k_lo > k_hi:
        raise ValueError(f"k range [{k_lo}, {k_hi}] invalid for n={m.n}")
    ks = list(range(k_lo, k_hi + 1))

    def score(k: int) -> float:
        model, _, _ = gmm_fit(m, k, cfg)
        return float(bic(model, m))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(score, ks))
    else:
        scores = [score(k) for k in ks]
    curve = SelectionCurve("bic", list(zip(ks, scores)))
    curve.proposed_k = _propose(curve)
    return curve


def curve_to_csv(curve: SelectionCurve) -> str:
    """CSV with header k,score and LF line endings."""
    lines = ["k,score"]
    lines.extend(f"{k},{score!r}" for k, score in curve.points)
    return "\n".join(lines) + "\n"


def curve_from_points(method: str, points, proposed_k=None) -> SelectionCurve:
    """Assemble a curve from raw (k, score) pairs, e.g. parsed JSON."""
    pts = [(int(k), float(s)) for k, s in points]
    return SelectionCurve(method, pts, proposed_k)
