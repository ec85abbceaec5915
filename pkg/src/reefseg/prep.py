"""Raster-to-feature-matrix preparation.

Everything a clusterer needs before it sees pixels: temporal median
compositing, band concatenation, per-feature scaling, masking out
nodata, block-mean downsampling, and the grid <-> matrix round trip.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .labelmap import INVALID, LabelMap
from .raster import Raster


@dataclass
class SampleMatrix:
    """Valid pixels flattened to an n x d feature matrix.

    index_map[i] is the row-major pixel index of row i in the source
    raster, so labels can be scattered back onto the grid.
    """

    values: np.ndarray  # float64, shape (n, d)
    index_map: np.ndarray  # int64, shape (n,), strictly increasing

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.index_map = np.ascontiguousarray(self.index_map, dtype=np.int64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D (n, d)")
        if self.index_map.shape != (self.values.shape[0],):
            raise ValueError("index_map length must equal the sample count")
        if not np.isfinite(self.values).all():
            raise ValueError("every sample must be finite in all features")
        if self.index_map.size > 1 and not (np.diff(self.index_map) > 0).all():
            raise ValueError("index_map must be strictly increasing")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class NormalizeParams:
    """Per-feature affine transform: scaled = (x - offset) / scale."""

    scheme: str
    offset: np.ndarray  # (d,)
    scale: np.ndarray  # (d,), never zero

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.scale + self.offset


def median_composite(stack: Sequence[Raster]) -> Raster:
    """Per-pixel, per-band median over time; valid where any input is.

    Even-count medians average the two middle values. A pixel invalid
    in every input stays invalid.
    """
    if len(stack) == 0:
        raise ValueError("median_composite needs at least one raster")
    first = stack[0]
    for r in stack[1:]:
        if r.shape != first.shape:
            raise ValueError(
                f"shape mismatch in stack: {r.shape} vs {first.shape}"
            )
    cube = np.stack([r.data for r in stack])  # (t, bands, h, w); invalid = NaN
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN pixels
        med = np.nanmedian(cube, axis=0)
    mask = np.stack([r.mask for r in stack]).any(axis=0)
    med = med.astype(np.float32)
    med[:, ~mask] = np.nan
    return Raster(first.width, first.height, first.bands, med, mask)


def stack_bands(parts: Sequence[Raster]) -> Raster:
    """Concatenate bands in the given order; mask = AND of part masks."""
    if len(parts) == 0:
        raise ValueError("stack_bands needs at least one raster")
    w, h = parts[0].width, parts[0].height
    for r in parts[1:]:
        if (r.width, r.height) != (w, h):
            raise ValueError(
                f"dimension mismatch: {r.width}x{r.height} vs {w}x{h}"
            )
    data = np.concatenate([r.data for r in parts], axis=0)
    mask = np.logical_and.reduce([r.mask for r in parts])
    return Raster(w, h, data.shape[0], data, mask)


def normalize(m: SampleMatrix, scheme: str = "minmax") -> tuple[SampleMatrix, NormalizeParams]:
    """Scale each feature column; constant columns map to all-zero.

    minmax: (x - min) / (max - min), range [0, 1].
    zscore: (x - mean) / sd with the population sd (divide by n), so
    a two-point column maps exactly to [-1, 1].
    """
    if m.n < 1:
        raise ValueError("normalize needs at least one sample")
    x = m.values
    if scheme == "minmax":
        offset = x.min(axis=0)
        scale = x.max(axis=0) - offset
    elif scheme == "zscore":
        offset = x.mean(axis=0)
        scale = np.sqrt(((x - offset) ** 2).mean(axis=0))
    else:
        raise ValueError(f"unknown normalization scheme {scheme!r}")
    scale = np.where(scale == 0.0, 1.0, scale)
    scaled = (x - offset) / scale
    params = NormalizeParams(scheme, offset, scale)
    return SampleMatrix(scaled, m.index_map.copy()), params


def to_samples(r: Raster) -> SampleMatrix:
    """One row per valid pixel in row-major order; d = band count."""
    flat_mask = r.mask.reshape(-1)
    idx = np.flatnonzero(flat_mask).astype(np.int64)
    if idx.size == 0:
        raise ValueError("raster has no valid pixels")
    flat = r.data.reshape(r.bands, -1)  # (d, h*w)
    values = flat[:, idx].T.astype(np.float64)
    return SampleMatrix(values, idx)


def from_labels(labels: np.ndarray, m: SampleMatrix, width: int, height: int) -> LabelMap:
    """Scatter per-row labels back onto the grid; elsewhere -2."""
    labels = np.asarray(labels)
    if labels.shape != (m.n,):
        raise ValueError(
            f"label vector length {labels.shape} != sample count {m.n}"
        )
    grid = np.full(width * height, INVALID, dtype=np.int32)
    grid[m.index_map] = labels
    return LabelMap(width, height, grid.reshape(height, width))


def downsample(r: Raster, factor: int) -> Raster:
    """Block-mean pooling over factor x factor tiles of valid samples.

    Output is ceil(w/f) x ceil(h/f); a block with no valid pixel is
    invalid in the output.
    """
    if factor < 1:
        raise ValueError("downsample factor must be >= 1")
    if factor == 1:
        return Raster(r.width, r.height, r.bands, r.data, r.mask)
    out_h = -(-r.height // factor)
    out_w = -(-r.width // factor)
    pad_h = out_h * factor - r.height
    pad_w = out_w * factor - r.width
    data = np.pad(
        r.data,
        ((0, 0), (0, pad_h), (0, pad_w)),
        constant_values=np.nan,
    )
    blocks = data.reshape(r.bands, out_h, factor, out_w, factor)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN blocks
        pooled = np.nanmean(blocks, axis=(2, 4)).astype(np.float32)
    mask = np.isfinite(pooled).all(axis=0)
    pooled[:, ~mask] = np.nan
    return Raster(out_w, out_h, r.bands, pooled, mask)
