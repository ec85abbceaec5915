"""The four pixel clusterers: k-means, GMM, AGNES, and DBSCAN.

All fitters are deterministic functions of (matrix, parameters, seed)
and return immutable models that are safe to share across threads.
"""

from .agnes import AGNES_DEFAULT_CAP, AgnesCapError, Dendrogram, agnes_fit
from .dbscan import (
    DbscanResult,
    GridIndex,
    dbscan_fit,
    grid_index_query,
    suggest_dbscan_params,
)
from .gmm import GmmConfig, GmmModel, gmm_fit
from .kmeans import KMeansConfig, KMeansModel, kmeans_fit, lloyd_run

__all__ = [
    "AGNES_DEFAULT_CAP",
    "AgnesCapError",
    "Dendrogram",
    "agnes_fit",
    "DbscanResult",
    "GridIndex",
    "dbscan_fit",
    "grid_index_query",
    "suggest_dbscan_params",
    "GmmConfig",
    "GmmModel",
    "gmm_fit",
    "KMeansConfig",
    "KMeansModel",
    "kmeans_fit",
    "lloyd_run",
]
