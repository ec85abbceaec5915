"""Bundled synthetic reef scene for demos and the acceptance suite.

A 128x128 island: a teal lagoon ringed by a bright sand flat, a
rock/rubble reef flat, a slope whose color and depth grade outward,
and deep ocean with a strong bathymetric gradient. The wide ocean
depth range is intentional: clustered with bathymetry it splits into
several depth bands that the refinement stage then merges, mirroring
how real geomorphic runs behave.

Everything is generated from a seeded RNG, so two builds of the scene
are byte-identical.
"""

from __future__ import annotations

import numpy as np

from .raster import Raster

SIZE = 128

# (inner radius, outer radius), RGB in [0,1], depth in metres
_LAGOON_R = 18.0
_SAND_R = 28.0
_FLAT_R = 40.0
_SLOPE_R = 52.0

_COLORS = {
    "lagoon": (0.10, 0.45, 0.48),
    "sand": (0.85, 0.82, 0.55),
    "flat": (0.35, 0.40, 0.25),
    "ocean": (0.05, 0.12, 0.35),
}
_DEPTHS = {"lagoon": 6.0, "sand": 0.6, "flat": 1.2}


def make_reef_scene(size: int = SIZE, seed: int = 7) -> tuple[Raster, Raster]:
    """Build (RGB mosaic, bathymetry) rasters for one synthetic reef.

    The mosaic is quantized to 8-bit levels so that writing it to PNG
    and loading it back reproduces the same samples. A small nodata
    notch sits in the top-left corner to exercise mask handling.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cx = cy = (size - 1) / 2.0
    r = np.hypot(xx - cx, yy - cy)

    rgb = np.empty((3, size, size), dtype=np.float64)
    depth = np.empty((size, size), dtype=np.float64)

    zones = {
        "lagoon": r < _LAGOON_R,
        "sand": (r >= _LAGOON_R) & (r < _SAND_R),
        "flat": (r >= _SAND_R) & (r < _FLAT_R),
    }
    for name, where in zones.items():
        for b in range(3):
            rgb[b][where] = _COLORS[name][b]
        depth[where] = _DEPTHS[name]

    # Slope: color fades from reef flat to ocean; depth falls 2 -> 20 m.
    slope = (r >= _FLAT_R) & (r < _SLOPE_R)
    t = (r[slope] - _FLAT_R) / (_SLOPE_R - _FLAT_R)
    for b in range(3):
        rgb[b][slope] = _COLORS["flat"][b] + t * (_COLORS["ocean"][b] - _COLORS["flat"][b])
    depth[slope] = 2.0 + t * 18.0

    # Ocean: nearly constant color, strongly graded depth 20 -> 45 m.
    ocean = r >= _SLOPE_R
    t = np.clip((r[ocean] - _SLOPE_R) / (r.max() - _SLOPE_R), 0.0, 1.0)
    for b in range(3):
        rgb[b][ocean] = _COLORS["ocean"][b] - 0.02 * t
    depth[ocean] = 20.0 + 25.0 * t

    rgb += rng.normal(scale=0.015, size=rgb.shape)
    depth += rng.normal(scale=0.25, size=depth.shape)
    rgb = np.clip(rgb, 0.0, 1.0)
    depth = np.clip(depth, 0.1, 50.0)

    # 8-bit quantization keeps PNG round trips exact.
    rgb = np.rint(rgb * 255.0) / 255.0

    mask = np.ones((size, size), dtype=bool)
    notch = max(size // 21, 2)
    mask[:notch, :notch] = False

    mosaic = Raster(size, size, 3, rgb.astype(np.float32), mask)
    bathy = Raster(size, size, 1, depth[np.newaxis].astype(np.float32), mask)
    return mosaic, bathy
