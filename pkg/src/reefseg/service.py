"""HTTP/JSON facade over the pipeline for the interactive mapping loop.

Jobs run clustering asynchronously on a FIFO worker; refinement
revisions are cheap, immutable, and re-runnable, which is what the
assess / re-run / label loop needs. State lives in plain directories
under a data root (config snapshot + artifacts), so crash recovery is
a rescan and every export is just a file read.

Layout:
    <root>/datasets/<id>/{mosaic.png|mosaic.bnd, bathymetry.bnd, meta.json}
    <root>/jobs/<id>/{job.json, labels_raw.bnd}
    <root>/jobs/<id>/revisions/<rid>/{map.png, labels.bnd, legend.json,
                                      provenance.json, export.zip}
"""

from __future__ import annotations

import io
import json
import queue
import shutil
import threading
import time
import uuid
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.datastructures import UploadFile
from starlette.exceptions import HTTPException as StarletteHTTPException

from .errors import ConfigError, DataError
from .labelmap import LabelMap
from .pipeline import (
    atomic_write_bytes,
    categorical_palette,
    compute_curve,
    config_from_dict,
    habitat_palette,
    labelmap_from_raster,
    labelmap_to_raster,
    run_clustering,
    run_refinement,
)
from .raster import bnd_bytes, load_bnd, load_png, png_bytes, render_labels
from .refine import legend_to_json
from .select import curve_to_csv


class ApiError(Exception):
    def __init__(self, status: int, message: str, details: list | None = None):
        self.status = status
        self.message = message
        self.details = details or []
        super().__init__(message)


@dataclass
class DatasetRecord:
    id: str
    dir: Path
    mosaic: Path
    bathymetry: Path | None
    width: int
    height: int
    bands: int

    def to_json(self) -> dict:
        return {
            "dataset_id": self.id,
            "width": self.width,
            "height": self.height,
            "bands": self.bands,
            "has_bathymetry": self.bathymetry is not None,
        }


@dataclass
class JobRecord:
    id: str
    dataset_id: str
    dir: Path
    config: dict  # raw pipeline-config dict (replayable)
    state: str = "queued"
    transitions: list[str] = field(default_factory=lambda: ["queued"])
    metrics: dict | None = None
    cluster_stats: list | None = None
    error: str | None = None
    created: float = field(default_factory=time.time)
    finished: float | None = None
    revisions: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        body = {
            "job_id": self.id,
            "dataset_id": self.dataset_id,
            "state": self.state,
            "transitions": list(self.transitions),
            "config": self.config,
            "created": self.created,
            "finished": self.finished,
            "revisions": list(self.revisions),
        }
        if self.state == "done":
            body["metrics"] = self.metrics
            body["cluster_stats"] = self.cluster_stats
        if self.state == "failed":
            body["error"] = self.error
        return body


class Store:
    """Thread-guarded registry of datasets, jobs, and revisions."""

    def __init__(self, root: Path, worker_count: int = 1, allow_local_paths: bool = True):
        self.root = Path(root)
        self.allow_local_paths = allow_local_paths
        (self.root / "datasets").mkdir(parents=True, exist_ok=True)
        (self.root / "jobs").mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self.datasets: dict[str, DatasetRecord] = {}
        self.jobs: dict[str, JobRecord] = {}
        self.queue: queue.Queue[str | None] = queue.Queue()
        self._recover()
        self.workers = [
            threading.Thread(target=self._worker, daemon=True, name=f"reefseg-worker-{i}")
            for i in range(max(worker_count, 1))
        ]
        for w in self.workers:
            w.start()

    # -- persistence ------------------------------------------------------

    def _dataset_meta_path(self, ds: DatasetRecord) -> Path:
        return ds.dir / "meta.json"

    def _persist_dataset(self, ds: DatasetRecord) -> None:
        meta = {**ds.to_json(), "mosaic": ds.mosaic.name,
                "bathymetry": ds.bathymetry.name if ds.bathymetry else None}
        atomic_write_bytes(
            self._dataset_meta_path(ds), (json.dumps(meta, indent=2) + "\n").encode()
        )

    def _persist_job(self, job: JobRecord) -> None:
        atomic_write_bytes(
            job.dir / "job.json", (json.dumps(job.to_json(), indent=2) + "\n").encode()
        )

    def _recover(self) -> None:
        for d in sorted((self.root / "datasets").iterdir()):
            meta_path = d / "meta.json"
            if not meta_path.is_file():
                continue
            meta = json.loads(meta_path.read_text())
            self.datasets[meta["dataset_id"]] = DatasetRecord(
                id=meta["dataset_id"],
                dir=d,
                mosaic=d / meta["mosaic"],
                bathymetry=(d / meta["bathymetry"]) if meta.get("bathymetry") else None,
                width=meta["width"],
                height=meta["height"],
                bands=meta["bands"],
            )
        for d in sorted((self.root / "jobs").iterdir()):
            job_path = d / "job.json"
            if not job_path.is_file():
                continue
            body = json.loads(job_path.read_text())
            job = JobRecord(
                id=body["job_id"],
                dataset_id=body["dataset_id"],
                dir=d,
                config=body["config"],
                state=body["state"],
                transitions=body.get("transitions", [body["state"]]),
                metrics=body.get("metrics"),
                cluster_stats=body.get("cluster_stats"),
                error=body.get("error"),
                created=body.get("created", 0.0),
                finished=body.get("finished"),
                revisions=body.get("revisions", []),
            )
            if job.state == "running":  # interrupted by a crash
                job.state = "failed"
                job.transitions.append("failed")
                job.error = "interrupted before completion"
                self._persist_job(job)
            self.jobs[job.id] = job
            if job.state == "queued":
                self.queue.put(job.id)

    # -- datasets ---------------------------------------------------------

    def register_dataset(self, mosaic_blob: bytes, mosaic_name: str,
                         bathy_blob: bytes | None, bathy_name: str | None) -> DatasetRecord:
        ds_id = uuid.uuid4().hex[:12]
        ds_dir = self.root / "datasets" / ds_id
        ds_dir.mkdir(parents=True)
        mosaic_ext = ".png" if mosaic_name.lower().endswith(".png") else ".bnd"
        mosaic_path = ds_dir / f"mosaic{mosaic_ext}"
        atomic_write_bytes(mosaic_path, mosaic_blob)
        try:
            mosaic = load_png(mosaic_path) if mosaic_ext == ".png" else load_bnd(mosaic_path)
        except DataError as exc:
            shutil.rmtree(ds_dir, ignore_errors=True)
            raise ApiError(400, f"unreadable mosaic: {exc}")
        bathy_path = None
        if bathy_blob is not None:
            bathy_path = ds_dir / "bathymetry.bnd"
            atomic_write_bytes(bathy_path, bathy_blob)
            try:
                bathy = load_bnd(bathy_path)
            except DataError as exc:
                shutil.rmtree(ds_dir, ignore_errors=True)
                raise ApiError(400, f"unreadable bathymetry: {exc}")
            if (bathy.width, bathy.height) != (mosaic.width, mosaic.height):
                shutil.rmtree(ds_dir, ignore_errors=True)
                raise ApiError(
                    400,
                    "mosaic and bathymetry dimensions differ",
                    details=[
                        {"mosaic": [mosaic.width, mosaic.height]},
                        {"bathymetry": [bathy.width, bathy.height]},
                    ],
                )
        ds = DatasetRecord(
            id=ds_id, dir=ds_dir, mosaic=mosaic_path, bathymetry=bathy_path,
            width=mosaic.width, height=mosaic.height, bands=mosaic.bands,
        )
        with self.lock:
            self.datasets[ds_id] = ds
        self._persist_dataset(ds)
        return ds

    def dataset(self, ds_id: str) -> DatasetRecord:
        with self.lock:
            ds = self.datasets.get(ds_id)
        if ds is None:
            raise ApiError(404, f"dataset {ds_id} not found")
        return ds

    # -- jobs ---------------------------------------------------------------

    def submit_job(self, ds: DatasetRecord, body: dict) -> JobRecord:
        params = dict(body.get("params") or {})
        config_raw = {
            "mode": body.get("mode"),
            "method": body.get("method"),
            "inputs": {"mosaic": str(ds.mosaic)},
            "seed": body.get("seed", 0),
            **{
                key: params[key]
                for key in ("k", "eps", "min_pts", "normalization", "agnes", "refinement", "legend")
                if key in params
            },
        }
        if ds.bathymetry is not None:
            config_raw["inputs"]["bathymetry"] = str(ds.bathymetry)
        elif body.get("mode") == "geomorphic":
            raise ApiError(422, "geomorphic jobs need a dataset with bathymetry",
                           details=["inputs.bathymetry missing from dataset"])
        try:
            cfg = config_from_dict(config_raw)
        except ConfigError as exc:
            raise ApiError(422, "invalid job parameters", details=exc.problems)

        job_id = uuid.uuid4().hex[:12]
        job_dir = self.root / "jobs" / job_id
        job_dir.mkdir(parents=True)
        job = JobRecord(id=job_id, dataset_id=ds.id, dir=job_dir, config=cfg.to_dict())
        with self.lock:
            self.jobs[job_id] = job
        self._persist_job(job)
        self.queue.put(job_id)
        return job

    def job(self, job_id: str) -> JobRecord:
        with self.lock:
            job = self.jobs.get(job_id)
        if job is None:
            raise ApiError(404, f"job {job_id} not found")
        return job

    def _transition(self, job: JobRecord, state: str) -> None:
        with self.lock:
            job.state = state
            job.transitions.append(state)
            if state in ("done", "failed"):
                job.finished = time.time()
        self._persist_job(job)

    def _worker(self) -> None:
        while True:
            job_id = self.queue.get()
            if job_id is None:
                return
            job = self.jobs.get(job_id)
            if job is None or job.state != "queued":
                continue
            self._transition(job, "running")
            try:
                cfg = config_from_dict(job.config)
                run = run_clustering(cfg)
                atomic_write_bytes(
                    job.dir / "labels_raw.bnd",
                    bnd_bytes(labelmap_to_raster(run.raw_map)),
                )
                with self.lock:
                    job.metrics = run.metrics
                    job.cluster_stats = run.cluster_stats
                self._transition(job, "done")
            except Exception as exc:  # surfaced via job state, not the API
                with self.lock:
                    job.error = str(exc)
                self._transition(job, "failed")

    def raw_labels(self, job: JobRecord) -> LabelMap:
        return labelmap_from_raster(load_bnd(job.dir / "labels_raw.bnd"))

    # -- revisions ----------------------------------------------------------

    def create_revision(self, job: JobRecord, body: dict) -> str:
        refinement = {
            "min_size": body.get("min_size", 1),
            "connectivity": body.get("connectivity", 8),
            "remaps": body.get("remaps", []),
        }
        config_raw = dict(job.config)
        config_raw["refinement"] = refinement
        config_raw["legend"] = body.get("legend")
        try:
            cfg = config_from_dict(config_raw)
        except ConfigError as exc:
            raise ApiError(422, "invalid refinement parameters", details=exc.problems)

        raw_map = self.raw_labels(job)
        provenance_core = {"config": cfg.to_dict(), "seed": cfg.seed,
                           "method": cfg.method, "k": cfg.k, "job_id": job.id}
        try:
            habitat, _ = run_refinement(raw_map, cfg, provenance_core)
        except Exception as exc:
            cause = getattr(exc, "cause", exc)
            raise ApiError(422, "refinement failed", details=[str(cause)])

        with self.lock:
            rid = f"r{len(job.revisions) + 1}"
            job.revisions.append(rid)
        rev_dir = job.dir / "revisions" / rid
        rev_dir.mkdir(parents=True)

        rendered = render_labels(habitat.labelmap, habitat_palette(habitat))
        files = {
            "labels.bnd": bnd_bytes(labelmap_to_raster(habitat.labelmap)),
            "map.png": png_bytes(rendered),
            "legend.json": legend_to_json(habitat.legend).encode(),
            "provenance.json": (
                json.dumps(
                    {**provenance_core, "revision": rid, "metrics": job.metrics},
                    indent=2,
                    sort_keys=True,
                )
                + "\n"
            ).encode(),
        }
        for name, blob in files.items():
            atomic_write_bytes(rev_dir / name, blob)
        atomic_write_bytes(rev_dir / "export.zip", _deterministic_zip(files))
        self._persist_job(job)
        return rid

    def revision_dir(self, job: JobRecord, rid: str) -> Path:
        if rid not in job.revisions:
            raise ApiError(404, f"revision {rid} not found on job {job.id}")
        return job.dir / "revisions" / rid

    def shutdown(self) -> None:
        for _ in self.workers:
            self.queue.put(None)
        for w in self.workers:
            w.join(timeout=5)


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise ApiError(400, "request body must be valid JSON")
    if not isinstance(body, dict):
        raise ApiError(400, "request body must be a JSON object")
    return body


def _deterministic_zip(files: dict[str, bytes]) -> bytes:
    """Zip with pinned metadata so identical content gives identical bytes."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(files):
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.external_attr = 0o644 << 16
            zf.writestr(info, files[name])
    return buf.getvalue()


def create_app(
    data_root: str | Path,
    worker_count: int = 1,
    allow_local_paths: bool = True,
    cors_origins: list[str] | None = None,
) -> FastAPI:
    store = Store(Path(data_root), worker_count, allow_local_paths)
    app = FastAPI(title="reefseg service")
    app.state.store = store
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": exc.message, "details": exc.details},
        )

    # Keep the error envelope uniform for framework-raised failures too.
    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error": "invalid request", "details": exc.errors()},
        )

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_req: Request, exc: StarletteHTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": str(exc.detail), "details": []},
        )

    # -- datasets ---------------------------------------------------------

    @app.post("/datasets", status_code=201)
    async def post_dataset(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/"):
            form = await request.form()
            mosaic = form.get("mosaic")
            if not isinstance(mosaic, UploadFile):
                raise ApiError(400, "multipart upload needs a 'mosaic' file part")
            mosaic_blob = await mosaic.read()
            mosaic_name = mosaic.filename or "mosaic.png"
            bathy = form.get("bathymetry")
            bathy_blob = await bathy.read() if isinstance(bathy, UploadFile) else None
            bathy_name = bathy.filename if isinstance(bathy, UploadFile) else None
        else:
            body = await _json_body(request)
            if not store.allow_local_paths:
                raise ApiError(400, "server-local path registration is disabled")
            mosaic_path = body.get("mosaic")
            if not mosaic_path:
                raise ApiError(400, "body needs a 'mosaic' path")
            try:
                mosaic_blob = Path(mosaic_path).read_bytes()
            except OSError as exc:
                raise ApiError(400, f"cannot read mosaic: {exc}")
            mosaic_name = mosaic_path
            bathy_blob, bathy_name = None, None
            if body.get("bathymetry"):
                try:
                    bathy_blob = Path(body["bathymetry"]).read_bytes()
                except OSError as exc:
                    raise ApiError(400, f"cannot read bathymetry: {exc}")
                bathy_name = body["bathymetry"]
        ds = store.register_dataset(mosaic_blob, mosaic_name, bathy_blob, bathy_name)
        return ds.to_json()

    @app.get("/datasets")
    def list_datasets():
        with store.lock:
            return [ds.to_json() for ds in store.datasets.values()]

    @app.get("/datasets/{ds_id}")
    def get_dataset(ds_id: str):
        return store.dataset(ds_id).to_json()

    @app.get("/datasets/{ds_id}/preview.png")
    def dataset_preview(ds_id: str):
        ds = store.dataset(ds_id)
        if ds.mosaic.suffix == ".png":
            blob = ds.mosaic.read_bytes()
        else:
            blob = png_bytes(load_bnd(ds.mosaic))
        return Response(blob, media_type="image/png")

    @app.get("/datasets/{ds_id}/curves")
    def dataset_curves(
        ds_id: str,
        method: str = "kmeans",
        kmin: int = 1,
        kmax: int = 8,
        normalization: str = "minmax",
        mode: str = "benthic",
        format: str = "json",
    ):
        ds = store.dataset(ds_id)
        if method not in ("kmeans", "gmm"):
            raise ApiError(422, "curves support method=kmeans (WCSS) or gmm (BIC)")
        if mode == "geomorphic" and ds.bathymetry is None:
            raise ApiError(422, "geomorphic curves need a dataset with bathymetry")
        cache_dir = ds.dir / "curves"
        cache_dir.mkdir(exist_ok=True)
        cache_key = f"{method}-{normalization}-{mode}-{kmin}-{kmax}"
        cache_path = cache_dir / f"{cache_key}.json"
        if cache_path.is_file():
            payload = json.loads(cache_path.read_text())
        else:
            config_raw = {
                "mode": mode,
                "method": method,
                "inputs": {"mosaic": str(ds.mosaic)},
                "normalization": normalization,
                "k": 1,
            }
            if mode == "geomorphic":
                config_raw["inputs"]["bathymetry"] = str(ds.bathymetry)
            try:
                cfg = config_from_dict(config_raw)
                curve = compute_curve(cfg, (kmin, kmax))
            except (ConfigError, ValueError) as exc:
                details = exc.problems if isinstance(exc, ConfigError) else [str(exc)]
                raise ApiError(422, "cannot compute curves", details=details)
            payload = {
                "method": curve.method,
                "points": [[k, s] for k, s in curve.points],
                "proposed_k": curve.proposed_k,
            }
            atomic_write_bytes(
                cache_path, (json.dumps(payload, indent=2) + "\n").encode()
            )
        if format == "csv":
            from .select import curve_from_points

            curve = curve_from_points(
                payload["method"], payload["points"], payload["proposed_k"]
            )
            return Response(curve_to_csv(curve), media_type="text/csv")
        return payload

    # -- jobs -------------------------------------------------------------

    @app.post("/jobs", status_code=202)
    async def post_job(request: Request):
        body = await _json_body(request)
        ds = store.dataset(body.get("dataset_id", ""))
        job = store.submit_job(ds, body)
        return {"job_id": job.id}

    @app.get("/jobs")
    def list_jobs(dataset_id: str | None = None):
        with store.lock:
            jobs = [
                j.to_json()
                for j in store.jobs.values()
                if dataset_id is None or j.dataset_id == dataset_id
            ]
        return sorted(jobs, key=lambda j: j["created"])

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return store.job(job_id).to_json()

    def _done_job(job_id: str) -> JobRecord:
        job = store.job(job_id)
        if job.state != "done":
            raise ApiError(409, f"job {job_id} is {job.state}, not done")
        return job

    @app.get("/jobs/{job_id}/map.png")
    def job_map(job_id: str):
        job = _done_job(job_id)
        raw = store.raw_labels(job)
        palette = categorical_palette(raw.present_labels())
        return Response(png_bytes(render_labels(raw, palette)), media_type="image/png")

    @app.get("/jobs/{job_id}/labels.bnd")
    def job_labels(job_id: str):
        job = _done_job(job_id)
        blob = (job.dir / "labels_raw.bnd").read_bytes()
        return Response(blob, media_type="application/octet-stream")

    @app.get("/jobs/{job_id}/clusters")
    def job_clusters(job_id: str):
        job = _done_job(job_id)
        return {"job_id": job.id, "clusters": job.cluster_stats}

    # -- refinement revisions ----------------------------------------------

    @app.post("/jobs/{job_id}/refine", status_code=201)
    async def post_refine(job_id: str, request: Request):
        job = _done_job(job_id)
        body = await _json_body(request)
        rid = store.create_revision(job, body)
        return {"revision_id": rid}

    @app.get("/jobs/{job_id}/revisions/{rid}/export")
    def revision_export(job_id: str, rid: str):
        rev_dir = store.revision_dir(store.job(job_id), rid)
        return Response(
            (rev_dir / "export.zip").read_bytes(), media_type="application/zip"
        )

    @app.get("/jobs/{job_id}/revisions/{rid}/export/{name}")
    def revision_file(job_id: str, rid: str, name: str):
        rev_dir = store.revision_dir(store.job(job_id), rid)
        if name not in ("map.png", "labels.bnd", "legend.json", "provenance.json"):
            raise ApiError(404, f"no artifact named {name}")
        media = {
            "map.png": "image/png",
            "labels.bnd": "application/octet-stream",
            "legend.json": "application/json",
            "provenance.json": "application/json",
        }[name]
        return Response((rev_dir / name).read_bytes(), media_type=media)

    return app
