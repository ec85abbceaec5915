"""Command line entry points.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
failure. REEFSEG_THREADS caps worker threads (absent or 0 keeps every
computation sequential, which guarantees bit-reproducible artifacts).
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .errors import ConfigError, DataError, NumericalError, StageError
from .pipeline import compute_curve, run_pipeline, validate_config
from .select import curve_to_csv

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _threads() -> int:
    raw = os.environ.get("REEFSEG_THREADS", "0")
    try:
        return max(int(raw), 0)
    except ValueError:
        return 0


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _classify(exc: Exception) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_DATA


def _load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(EXIT_CONFIG, f"cannot read config {path}: {exc}")
    try:
        return validate_config(text)
    except ConfigError as exc:
        for problem in exc.problems:
            click.echo(f"config error: {problem}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
def main():
    """Reef habitat mapping by unsupervised raster segmentation."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def run(config_path, seed, out_dir):
    """Execute a full pipeline run and write its artifacts."""
    cfg = _load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    try:
        art = run_pipeline(cfg, out_dir)
    except (StageError, DataError, NumericalError, ConfigError, ValueError) as exc:
        _fail(_classify(exc), str(exc))
    click.echo(f"wrote {art.map_png}")
    click.echo(f"wrote {art.labels_bnd}")
    click.echo(f"wrote {art.legend_json}")
    click.echo(f"wrote {art.provenance_json}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--k-min", type=int, required=True)
@click.option("--k-max", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), default="curves.csv")
def curves(config_path, k_min, k_max, out_path):
    """Write the WCSS or BIC selection curve as CSV."""
    cfg = _load_config(config_path)
    try:
        curve = compute_curve(cfg, (k_min, k_max), workers=_threads())
    except (StageError, DataError, NumericalError, ValueError) as exc:
        _fail(_classify(exc), str(exc))
    Path(out_path).write_text(curve_to_csv(curve))
    proposed = curve.proposed_k if curve.proposed_k is not None else "none"
    click.echo(f"wrote {out_path} ({curve.method}, proposed k = {proposed})")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def validate(config_path):
    """Check a config document; reports every violation."""
    _load_config(config_path)
    click.echo("config ok")


@main.command("demo-data")
@click.option("--out", "out_dir", type=click.Path(), default="demo")
@click.option("--seed", type=int, default=7)
@click.option("--size", type=int, default=128)
def demo_data(out_dir, seed, size):
    """Generate the bundled synthetic reef scene (mosaic + bathymetry)."""
    from .raster import save_bnd, save_png
    from .synthetic import make_reef_scene

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mosaic, bathy = make_reef_scene(size=size, seed=seed)
    save_png(mosaic, out / "mosaic.png")
    save_bnd(bathy, out / "bathymetry.bnd")
    click.echo(f"wrote {out / 'mosaic.png'}")
    click.echo(f"wrote {out / 'bathymetry.bnd'}")


@main.command()
@click.option("--data-root", type=click.Path(), default=None)
@click.option("--bind", default=None, help="host:port, default 127.0.0.1:8077")
def serve(data_root, bind):
    """Run the HTTP service for the interactive mapping loop."""
    import uvicorn

    from .service import create_app

    root = data_root or os.environ.get("REEFSEG_DATA_ROOT", "reefseg-data")
    addr = bind or os.environ.get("REEFSEG_BIND", "127.0.0.1:8077")
    host, _, port = addr.partition(":")
    workers = max(_threads(), 1)
    app = create_app(Path(root), worker_count=workers)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8077))


if __name__ == "__main__":
    main()
