"""Per-pixel cluster assignments aligned to a source raster.

Two sentinel values live below zero so they can never collide with
cluster ids: -1 marks DBSCAN noise (clustered, rejected), -2 marks
pixels that were never clustered (outside the validity mask).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NOISE = -1
INVALID = -2


@dataclass
class LabelMap:
    """Integer label per pixel, same grid as the raster it came from."""

    width: int
    height: int
    labels: np.ndarray  # int32, shape (height, width)

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.shape != (self.height, self.width):
            raise ValueError(
                f"labels shape {self.labels.shape} != (height={self.height}, width={self.width})"
            )
        if self.labels.min(initial=0) < INVALID:
            raise ValueError("labels below the invalid sentinel (-2) are not allowed")

    @property
    def sentinel_mask(self) -> np.ndarray:
        """True where the pixel is noise or was never clustered."""
        return self.labels < 0

    def present_labels(self) -> list[int]:
        """Sorted non-sentinel label ids present in the map."""
        vals = np.unique(self.labels)
        return [int(v) for v in vals if v >= 0]

    def copy(self) -> "LabelMap":
        return LabelMap(self.width, self.height, self.labels.copy())


@dataclass
class HabitatMap:
    """A refined label map plus the legend and run provenance."""

    labelmap: LabelMap
    legend: list  # list[LegendEntry], see refine module
    provenance: dict = field(default_factory=dict)
