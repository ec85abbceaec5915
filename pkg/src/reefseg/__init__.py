"""reefseg: unsupervised raster segmentation for reef habitat mapping.

Pipeline shape: load rasters, flatten valid pixels to a feature
matrix, cluster (k-means / GMM / AGNES / DBSCAN), pick k off WCSS or
BIC curves, refine the label map with logical rules, attach a legend,
render. A CLI drives one-shot runs; an HTTP service plus the studio
front end drive the interactive assess / re-run / label loop.
"""

from .cluster import agnes_fit, dbscan_fit, gmm_fit, kmeans_fit
from .labelmap import INVALID, NOISE, HabitatMap, LabelMap
from .pipeline import PipelineConfig, run_pipeline, validate_config
from .prep import (
    SampleMatrix,
    downsample,
    from_labels,
    median_composite,
    normalize,
    stack_bands,
    to_samples,
)
from .raster import (
    Palette,
    PaletteEntry,
    Raster,
    load_bnd,
    load_png,
    render_labels,
    save_bnd,
    save_png,
)
from .refine import (
    LegendEntry,
    assign_legend,
    compact,
    connected_components,
    merge_small_components,
    remap_labels,
)
from .select import bic, bic_curve, detect_knee, wcss_curve

__version__ = "0.1.0"

__all__ = [
    "Raster",
    "Palette",
    "PaletteEntry",
    "load_png",
    "save_png",
    "load_bnd",
    "save_bnd",
    "render_labels",
    "SampleMatrix",
    "median_composite",
    "stack_bands",
    "normalize",
    "to_samples",
    "from_labels",
    "downsample",
    "kmeans_fit",
    "gmm_fit",
    "agnes_fit",
    "dbscan_fit",
    "wcss_curve",
    "bic",
    "bic_curve",
    "detect_knee",
    "LabelMap",
    "HabitatMap",
    "NOISE",
    "INVALID",
    "connected_components",
    "merge_small_components",
    "remap_labels",
    "compact",
    "assign_legend",
    "LegendEntry",
    "PipelineConfig",
    "validate_config",
    "run_pipeline",
]
