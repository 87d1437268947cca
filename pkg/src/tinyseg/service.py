"""HTTP service: upload/detect, frame streaming, mask upload, download.

Communication with the browser happens only at upload and download time;
everything interactive runs client-side on the FrameV1 payload. Sessions
are isolated by unforgeable server-issued keys (see `sessions`).
"""

from __future__ import annotations

import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import fits as fitsio
from . import frame, npyio, rle, workflow
from .detect import DetectorSpec, detect, parse_detector_spec
from .errors import MalformedRle, TinysegError, UnparsableFile
from .sessions import DETECTING, EXPIRED, READY, SessionRegistry

log = logging.getLogger(__name__)

_UUID_RE = re.compile(
    r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$"
)


@dataclass
class ServiceConfig:
    port: int = 8080
    max_upload_bytes: int = 512 * 1024 * 1024
    session_ttl_seconds: float = 86400.0
    detector: str = "baseline"
    worker_pool_size: int | None = None
    detector_queue_timeout: float = 30.0
    temp_root: Path | None = None
    static_dir: Path | None = None
    mask_ext_name: str = fitsio.DEFAULT_MASK_EXTNAME
    gc_interval: float | None = 300.0

    @classmethod
    def from_env(cls, env=os.environ) -> "ServiceConfig":
        cfg = cls()
        if "PORT" in env:
            cfg.port = int(env["PORT"])
        if "MAX_UPLOAD_BYTES" in env:
            cfg.max_upload_bytes = int(env["MAX_UPLOAD_BYTES"])
        if "SESSION_TTL_SECONDS" in env:
            cfg.session_ttl_seconds = float(env["SESSION_TTL_SECONDS"])
        if "DETECTOR" in env:
            cfg.detector = env["DETECTOR"]
        if "WORKER_POOL_SIZE" in env:
            cfg.worker_pool_size = int(env["WORKER_POOL_SIZE"])
        if "STATIC_DIR" in env:
            cfg.static_dir = Path(env["STATIC_DIR"])
        return cfg


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": code, "message": message})


def _region_json(region) -> dict:
    return {
        "label": region.label,
        "pixel_count": region.pixel_count,
        "bbox": list(region.bbox),
        "centroid": list(region.centroid),
    }


class _DetectorGate:
    """Bounded admission to detector work; full pool answers 503."""

    def __init__(self, slots: int, wait: float):
        self._sem = threading.Semaphore(slots)
        self._wait = wait

    def __enter__(self):
        if not self._sem.acquire(timeout=self._wait):
            raise _Busy()
        return self

    def __exit__(self, *exc):
        self._sem.release()
        return False


class _Busy(Exception):
    pass


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    temp_root = config.temp_root or Path(tempfile.mkdtemp(prefix="tinyseg-"))
    registry = SessionRegistry(temp_root)
    default_detector = parse_detector_spec(config.detector)
    pool_size = config.worker_pool_size or os.cpu_count() or 4
    gate = _DetectorGate(pool_size, config.detector_queue_timeout)

    app = FastAPI(title="tinyseg", docs_url=None, redoc_url=None)
    app.state.registry = registry
    app.state.config = config

    if config.gc_interval:
        def _gc_loop():
            while True:
                time.sleep(config.gc_interval)
                try:
                    registry.session_gc(ttl=config.session_ttl_seconds)
                except Exception:
                    log.exception("session gc pass failed")

        threading.Thread(target=_gc_loop, daemon=True, name="tinyseg-gc").start()

    def _lookup(key: str):
        record = registry.get(key)
        if record is None:
            return None, _error(404, "unknown_key", f"no session {key}")
        if record.state == EXPIRED:
            return None, _error(410, "expired", "session expired; re-upload the file")
        if record.state == DETECTING:
            return None, _error(409, "not_ready", "detection still running")
        return record, None

    @app.post("/api/v1/images")
    def upload(request: Request,
               file: UploadFile | None = File(None),
               client_uuid: str | None = Form(None)):
        if file is None:
            return _error(400, "unparsable_file", "multipart field 'file' is required")
        if client_uuid is None or not _UUID_RE.match(client_uuid):
            return _error(400, "bad_uuid", "client_uuid must be RFC-4122 formatted")

        declared = request.headers.get("content-length")
        if declared and int(declared) > config.max_upload_bytes + 8192:
            return _error(413, "file_too_large",
                          f"upload cap is {config.max_upload_bytes} bytes")
        chunks = []
        total = 0
        while True:
            chunk = file.file.read(1 << 20)
            if not chunk:
                break
            total += len(chunk)
            if total > config.max_upload_bytes:
                return _error(413, "file_too_large",
                              f"upload cap is {config.max_upload_bytes} bytes")
            chunks.append(chunk)
        raw = b"".join(chunks)

        detector_arg = request.query_params.get("detector")
        try:
            spec: DetectorSpec = (parse_detector_spec(detector_arg)
                                  if detector_arg else default_detector)
        except ValueError as exc:
            return _error(400, "bad_detector", str(exc))

        try:
            doc = workflow.parse_upload(raw)
        except UnparsableFile as exc:
            return _error(400, "unparsable_file", str(exc))
        img = doc.primary_image
        if not np.isfinite(img).any():
            return _error(400, "unparsable_file", "image has no finite pixels")

        client_ip = request.client.host if request.client else ""
        record = registry.create(client_uuid, client_ip,
                                 file.filename or "upload")
        try:
            record.upload_path.write_bytes(raw)
            try:
                with gate:
                    prob = detect(spec, img, source_doc=doc)
            except _Busy:
                registry.drop(record.key)
                return _error(503, "detector_busy", "all detector workers are busy")
            except TinysegError as exc:
                registry.drop(record.key)
                return _error(400, "detector_failed", str(exc))
            record.prob_path.write_bytes(npyio.serialize_npy(prob))
            objects = workflow.default_objects(prob)
            with record.lock:
                record.height, record.width = img.shape
                record.objects = objects
                record.overlay = None
                record.state = READY
            registry.touch(record)
        except Exception:
            registry.drop(record.key)
            raise
        return JSONResponse({
            "key": record.key,
            "width": record.width,
            "height": record.height,
            "objects": [_region_json(r) for r in objects],
        })

    @app.get("/api/v1/frame/{key}")
    def get_frame(key: str):
        record, err = _lookup(key)
        if err:
            return err
        with record.lock:
            doc = workflow.parse_upload(record.upload_path.read_bytes())
            prob = npyio.load_npy(record.prob_path.read_bytes())
        registry.touch(record)
        payload = frame.encode_frame(doc.primary_image, prob)
        return Response(content=payload, media_type="application/octet-stream")

    @app.post("/api/v1/mask/{key}")
    async def post_mask(key: str, request: Request):
        record, err = _lookup(key)
        if err:
            return err
        try:
            body = await request.json()
        except Exception:
            return _error(400, "malformed_rle", "body must be JSON")
        try:
            width = int(body["width"])
            height = int(body["height"])
            threshold = float(body["threshold"])
            dilation = int(body["dilation"])
            runs = [tuple(run) for run in body.get("runs", [])]
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, "malformed_rle", f"bad body: {exc}")
        if (width, height) != (record.width, record.height):
            return _error(400, "dimension_mismatch",
                          f"got {width}x{height}, session is "
                          f"{record.width}x{record.height}")
        if not 0.0 <= threshold <= 1.0 or dilation < 0:
            return _error(400, "malformed_rle", "threshold/dilation out of range")
        try:
            overlay = rle.decode_overlay_rle(runs, width, height)
        except MalformedRle as exc:
            return _error(400, "malformed_rle", str(exc))
        with record.lock:
            record.threshold = threshold
            record.dilation = dilation
            record.overlay = overlay
        registry.touch(record)
        return Response(status_code=204)

    @app.get("/api/v1/download/{key}")
    def download(key: str):
        record, err = _lookup(key)
        if err:
            return err
        with record.lock:
            raw = record.upload_path.read_bytes()
            prob = npyio.load_npy(record.prob_path.read_bytes())
            doc = workflow.parse_upload(raw)
            mask = workflow.compose_final_mask(
                prob, record.threshold, record.dilation, record.overlay)
            out = fitsio.write_fits_with_mask(doc, mask, config.mask_ext_name)
        registry.touch(record)
        stem = Path(record.upload_name).stem or "image"
        return Response(
            content=out,
            media_type="application/fits",
            headers={"Content-Disposition":
                     f'attachment; filename="{stem}_masked.fits"'},
        )

    static_dir = config.static_dir
    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = candidate if candidate.is_dir() else None
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
