"""Config-driven end-to-end runs: rasters in, habitat maps out.

One JSON config describes a complete run; the CLI and the HTTP service
both execute through here, so a job replayed from its provenance
config reproduces the same bytes. Clustering and refinement are
separate phases because the interactive loop re-runs refinement many
times on one clustering.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cluster import (
    AGNES_DEFAULT_CAP,
    GmmConfig,
    KMeansConfig,
    agnes_fit,
    dbscan_fit,
    gmm_fit,
    kmeans_fit,
    suggest_dbscan_params,
)
from .errors import ConfigError, DataError, StageError
from .labelmap import HabitatMap, LabelMap
from .prep import SampleMatrix, downsample, from_labels, normalize, stack_bands, to_samples
from .raster import (
    Palette,
    PaletteEntry,
    Raster,
    bnd_bytes,
    load_bnd,
    load_png,
    png_bytes,
    render_labels,
)
from .refine import (
    LegendEntry,
    assign_legend,
    compact,
    legend_to_json,
    merge_small_components,
    preset_legend,
    remap_labels,
)
from .select import bic, bic_curve, curve_to_csv, wcss_curve

MODES = ("benthic", "geomorphic")
METHODS = ("kmeans", "gmm", "agnes", "dbscan")

# Raw cluster maps cycle through these colors until a legend exists.
CATEGORICAL_COLORS = [
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (250, 190, 212),
    (0, 128, 128),
    (220, 190, 255),
]


def categorical_color(label: int) -> tuple[int, int, int]:
    return CATEGORICAL_COLORS[label % len(CATEGORICAL_COLORS)]


def categorical_palette(labels: list[int]) -> Palette:
    entries = [
        PaletteEntry(lab, categorical_color(lab), f"cluster {lab}") for lab in labels
    ]
    return Palette(entries)


@dataclass
class AgnesOptions:
    downsample_factor: int = 5  # the 20%-linear-scale reading
    linkage: str = "ward"
    max_samples: int = AGNES_DEFAULT_CAP


@dataclass
class RefinementOptions:
    min_size: int = 50
    connectivity: int = 8
    remaps: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class PipelineConfig:
    mode: str
    mosaic: str
    method: str
    bathymetry: str | None = None
    k: int | None = None
    eps: float | None = None
    min_pts: int | None = None
    normalization: str = "minmax"
    agnes: AgnesOptions = field(default_factory=AgnesOptions)
    refinement: RefinementOptions = field(default_factory=RefinementOptions)
    legend: str | list[dict] | None = None
    seed: int = 0
    output_dir: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = {"mosaic": d.pop("mosaic")}
        bathy = d.pop("bathymetry")
        if bathy is not None:
            d["inputs"]["bathymetry"] = bathy
        d["refinement"]["remaps"] = [list(r) for r in self.refinement.remaps]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build a config from parsed JSON, collecting every violation."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config document must be a JSON object"])

    mode = raw.get("mode")
    if mode not in MODES:
        problems.append(f"mode must be one of {MODES}, got {mode!r}")
    method = raw.get("method")
    if method not in METHODS:
        problems.append(f"method must be one of {METHODS}, got {method!r}")

    inputs = raw.get("inputs") or {}
    mosaic = inputs.get("mosaic")
    if not mosaic:
        problems.append("inputs.mosaic is required")
    bathymetry = inputs.get("bathymetry")
    if mode == "geomorphic" and not bathymetry:
        problems.append("geomorphic mode requires inputs.bathymetry")

    k = raw.get("k")
    eps = raw.get("eps")
    min_pts = raw.get("min_pts")
    if method == "dbscan":
        if k is not None:
            problems.append("method dbscan does not take k; use eps/min_pts")
        if eps is not None and eps <= 0:
            problems.append("eps must be > 0")
        if min_pts is not None and min_pts < 1:
            problems.append("min_pts must be >= 1")
    elif method in METHODS:
        if k is None:
            problems.append(f"method {method} requires k >= 1")
        elif not isinstance(k, int) or k < 1:
            problems.append(f"k must be an integer >= 1, got {k!r}")

    normalization = raw.get("normalization", "minmax")
    if normalization not in ("minmax", "zscore"):
        problems.append(f"normalization must be minmax or zscore, got {normalization!r}")

    agnes_raw = raw.get("agnes") or {}
    agnes = AgnesOptions(
        downsample_factor=agnes_raw.get("downsample_factor", 5),
        linkage=agnes_raw.get("linkage", "ward"),
        max_samples=agnes_raw.get("max_samples", AGNES_DEFAULT_CAP),
    )
    if agnes.downsample_factor < 1:
        problems.append("agnes.downsample_factor must be >= 1")
    if agnes.linkage not in ("ward", "complete", "average"):
        problems.append(f"agnes.linkage invalid: {agnes.linkage!r}")

    ref_raw = raw.get("refinement") or {}
    remaps = []
    for item in ref_raw.get("remaps", []):
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 2
            or not all(isinstance(v, int) for v in item)
        ):
            problems.append(f"refinement.remaps entries must be [from, to] ints, got {item!r}")
        else:
            remaps.append((item[0], item[1]))
    refinement = RefinementOptions(
        min_size=ref_raw.get("min_size", 50),
        connectivity=ref_raw.get("connectivity", 8),
        remaps=remaps,
    )
    if refinement.min_size < 1:
        problems.append("refinement.min_size must be >= 1")
    if refinement.connectivity not in (4, 8):
        problems.append("refinement.connectivity must be 4 or 8")

    legend = raw.get("legend")
    if legend is not None and not isinstance(legend, str):
        if not isinstance(legend, list):
            problems.append("legend must be a preset name or a list of entries")
        else:
            for entry in legend:
                if not isinstance(entry, dict) or not {"label", "class", "color"} <= set(entry):
                    problems.append(f"legend entry needs label/class/color, got {entry!r}")
    if isinstance(legend, str) and legend not in ("benthic", "geomorphic"):
        problems.append(f"unknown legend preset {legend!r}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        problems.append(f"seed must be an integer, got {seed!r}")

    if problems:
        raise ConfigError(problems)
    return PipelineConfig(
        mode=mode,
        mosaic=mosaic,
        bathymetry=bathymetry,
        method=method,
        k=k,
        eps=eps,
        min_pts=min_pts,
        normalization=normalization,
        agnes=agnes,
        refinement=refinement,
        legend=legend,
        seed=seed,
        output_dir=raw.get("output_dir"),
    )


def validate_config(text: str) -> PipelineConfig:
    """Parse a JSON config document; ConfigError lists all violations."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"config is not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}"]
        ) from exc
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


@dataclass
class ClusterRun:
    """Everything the clustering phase produced, before refinement."""

    working: Raster  # after stacking and (for agnes) downsampling
    samples: SampleMatrix  # unnormalized features of the working raster
    labels: np.ndarray  # per-sample cluster labels
    raw_map: LabelMap
    metrics: dict
    cluster_stats: list[dict]
    timings: dict[str, float]


def _load_raster(path: str) -> Raster:
    lower = str(path).lower()
    if lower.endswith(".png"):
        return load_png(path)
    if lower.endswith(".bnd"):
        return load_bnd(path)
    raise DataError(f"{path}: unknown raster format (expected .png or .bnd)")


def _stage(timings: dict, name: str):
    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()

        def __exit__(self, exc_type, exc, tb):
            timings[name] = time.perf_counter() - self.t0
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False

    return _Timer()


def _cluster_stats(samples: SampleMatrix, labels: np.ndarray, bands: int) -> list[dict]:
    stats = []
    for lab in sorted(set(int(v) for v in np.unique(labels))):
        sel = labels == lab
        mean = samples.values[sel].mean(axis=0)
        if lab < 0:
            color = (64, 64, 64)
        elif bands >= 3:
            color = tuple(
                int(np.clip(np.rint(c * 255.0), 0, 255)) for c in mean[:3]
            )
        else:
            g = int(np.clip(np.rint(mean[0] * 255.0), 0, 255))
            color = (g, g, g)
        stats.append(
            {
                "label": int(lab),
                "size_px": int(sel.sum()),
                "mean_features": [float(v) for v in mean],
                "mean_color": list(color),
            }
        )
    return stats


def run_clustering(cfg: PipelineConfig) -> ClusterRun:
    """Steps a-d: load, stack, normalize, fit, scatter back to a grid."""
    timings: dict[str, float] = {}
    with _stage(timings, "load"):
        working = _load_raster(cfg.mosaic)
        if cfg.mode == "geomorphic":
            bathy = _load_raster(cfg.bathymetry)
    if cfg.mode == "geomorphic":
        with _stage(timings, "stack"):
            working = stack_bands([working, bathy])
    if cfg.method == "agnes" and cfg.agnes.downsample_factor > 1:
        with _stage(timings, "downsample"):
            working = downsample(working, cfg.agnes.downsample_factor)
    with _stage(timings, "to_samples"):
        samples = to_samples(working)
    with _stage(timings, "normalize"):
        normalized, _ = normalize(samples, cfg.normalization)

    metrics: dict = {"method": cfg.method, "n_samples": samples.n}
    with _stage(timings, "fit"):
        if cfg.method == "kmeans":
            model, labels = kmeans_fit(normalized, cfg.k, KMeansConfig(seed=cfg.seed))
            metrics.update(
                wcss=model.wcss, iterations=model.iterations, k=model.k
            )
        elif cfg.method == "gmm":
            model, labels, _ = gmm_fit(normalized, cfg.k, GmmConfig(seed=cfg.seed))
            metrics.update(
                log_likelihood=model.log_likelihood,
                bic=float(bic(model, normalized)),
                iterations=model.iterations,
                k=model.k,
            )
        elif cfg.method == "agnes":
            _, labels = agnes_fit(
                normalized,
                cfg.k,
                linkage=cfg.agnes.linkage,
                cap=cfg.agnes.max_samples,
            )
            metrics.update(k=cfg.k, iterations=samples.n - 1)
        else:  # dbscan
            eps, min_pts = cfg.eps, cfg.min_pts
            if eps is None or min_pts is None:
                auto_eps, auto_min = suggest_dbscan_params(normalized, seed=cfg.seed)
                eps = eps if eps is not None else auto_eps
                min_pts = min_pts if min_pts is not None else auto_min
            result = dbscan_fit(normalized, eps, min_pts)
            labels = result.labels
            metrics.update(
                eps=result.eps,
                min_pts=result.min_pts,
                n_clusters=result.n_clusters,
                noise_px=int((labels == -1).sum()),
                iterations=1,
            )
    with _stage(timings, "scatter"):
        raw_map = from_labels(labels, samples, working.width, working.height)
    stats = _cluster_stats(samples, labels, working.bands)
    return ClusterRun(working, samples, labels, raw_map, metrics, stats, timings)


def _resolve_legend(cfg_legend, labels_present: list[int]) -> list[LegendEntry]:
    if cfg_legend is None:
        return [
            LegendEntry(lab, f"cluster {lab}", categorical_color(lab))
            for lab in labels_present
        ]
    if isinstance(cfg_legend, str):
        return preset_legend(cfg_legend, labels_present)
    out = []
    for entry in cfg_legend:
        color = entry["color"]
        if isinstance(color, str):
            h = color.lstrip("#")
            color = tuple(int(h[i : i + 2], 16) for i in (0, 2, 4))
        else:
            color = tuple(int(c) for c in color)
        out.append(LegendEntry(int(entry["label"]), str(entry["class"]), color))
    return out


def run_refinement(
    raw_map: LabelMap, cfg: PipelineConfig, provenance: dict | None = None
) -> tuple[HabitatMap, dict[str, float]]:
    """Step h and legend assignment on an existing clustering."""
    timings: dict[str, float] = {}
    with _stage(timings, "merge_small"):
        merged = merge_small_components(
            raw_map, cfg.refinement.min_size, cfg.refinement.connectivity
        )
    with _stage(timings, "remap"):
        remapped = remap_labels(merged, cfg.refinement.remaps)
    with _stage(timings, "compact"):
        compacted, _ = compact(remapped)
    with _stage(timings, "legend"):
        entries = _resolve_legend(cfg.legend, compacted.present_labels())
        habitat = assign_legend(compacted, entries, provenance)
    return habitat, timings


@dataclass
class RunArtifacts:
    out_dir: Path
    map_png: Path
    labels_bnd: Path
    legend_json: Path
    provenance_json: Path
    curves_csv: Path | None = None


def atomic_write_bytes(path: Path, blob: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def labelmap_to_raster(lm: LabelMap) -> Raster:
    """Labels as a 1-band float raster (exact for ids below 2^24)."""
    return Raster(lm.width, lm.height, 1, lm.labels[np.newaxis].astype(np.float32), None)


def labelmap_from_raster(r: Raster) -> LabelMap:
    if r.bands != 1:
        raise DataError("label rasters must have exactly one band")
    return LabelMap(r.width, r.height, r.data[0].astype(np.int32))


def habitat_palette(habitat: HabitatMap) -> Palette:
    entries = [
        PaletteEntry(e.label, e.color, e.name) for e in habitat.legend
    ]
    return Palette(entries)


def run_pipeline(
    cfg: PipelineConfig,
    out_dir: str | Path | None = None,
    curves_range: tuple[int, int] | None = None,
) -> RunArtifacts:
    """Full run: cluster, refine, render, and write every artifact.

    Artifacts land atomically (temp file + rename). The provenance
    JSON embeds the exact config, so replaying it reproduces the label
    BND byte-for-byte.
    """
    out = Path(out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)

    run = run_clustering(cfg)
    provenance_core = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "method": cfg.method,
        "k": cfg.k,
    }
    habitat, refine_timings = run_refinement(run.raw_map, cfg, provenance_core)
    timings = {**run.timings, **refine_timings}

    with _stage(timings, "render"):
        rendered = render_labels(habitat.labelmap, habitat_palette(habitat))

    art = RunArtifacts(
        out_dir=out,
        map_png=out / "map.png",
        labels_bnd=out / "labels.bnd",
        legend_json=out / "legend.json",
        provenance_json=out / "provenance.json",
    )
    with _stage(timings, "write"):
        atomic_write_bytes(art.labels_bnd, bnd_bytes(labelmap_to_raster(habitat.labelmap)))
        atomic_write_bytes(art.map_png, png_bytes(rendered))
        atomic_write_bytes(art.legend_json, legend_to_json(habitat.legend).encode())
        if curves_range is not None:
            art.curves_csv = out / "curves.csv"
            curve = compute_curve(cfg, curves_range)
            atomic_write_bytes(art.curves_csv, curve_to_csv(curve).encode())
        provenance = {
            **provenance_core,
            "metrics": run.metrics,
            "cluster_stats": run.cluster_stats,
            "timings": {k: round(v, 6) for k, v in timings.items()},
            "artifacts": {
                "map_png": art.map_png.name,
                "labels_bnd": art.labels_bnd.name,
                "legend_json": art.legend_json.name,
            },
        }
        atomic_write_bytes(
            art.provenance_json,
            (json.dumps(provenance, indent=2, sort_keys=True) + "\n").encode(),
        )
    return art


def compute_curve(cfg: PipelineConfig, k_range: tuple[int, int], workers: int = 0):
    """Selection curve for the configured dataset and normalization.

    The gmm method gets a BIC curve; everything else gets a WCSS
    curve. workers > 1 parallelizes the independent per-k BIC fits
    (the WCSS curve is warm-start chained, so it stays sequential).
    """
    working = _load_raster(cfg.mosaic)
    if cfg.mode == "geomorphic":
        working = stack_bands([working, _load_raster(cfg.bathymetry)])
    samples = to_samples(working)
    normalized, _ = normalize(samples, cfg.normalization)
    if cfg.method == "gmm":
        return bic_curve(
            normalized, k_range, GmmConfig(seed=cfg.seed), workers=max(workers, 1)
        )
    return wcss_curve(normalized, k_range, KMeansConfig(seed=cfg.seed))
