from __future__ import annotations

import io
import time
import uuid

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tinyseg.fits import load_fits, find_extension, decode_image_hdu
from tinyseg.frame import decode_frame
from tinyseg.npyio import serialize_npy
from tinyseg.service import ServiceConfig, create_app

from .oracles import ref_fits_primary


@pytest.fixture
def client(tmp_path):
    config = ServiceConfig(temp_root=tmp_path / "sessions", gc_interval=None,
                           session_ttl_seconds=3600.0)
    app = create_app(config)
    with TestClient(app) as test_client:
        yield test_client


def fresh_uuid() -> str:
    return str(uuid.uuid4())


def upload_npy(client, img, client_uuid=None, **kwargs):
    return client.post(
        "/api/v1/images",
        files={"file": ("img.npy", io.BytesIO(serialize_npy(img)))},
        data={"client_uuid": client_uuid or fresh_uuid()},
        **kwargs,
    )


def make_test_image(seed=0, shape=(12, 16)):
    rng = np.random.default_rng(seed)
    img = rng.normal(100, 3, shape).astype(np.float32)
    img[shape[0] // 2, shape[1] // 2] = 50_000.0
    return img


def test_upload_returns_key_and_geometry(client):
    resp = upload_npy(client, make_test_image(shape=(2, 3)))
    assert resp.status_code == 200
    body = resp.json()
    assert body["width"] == 3 and body["height"] == 2
    assert len(body["key"]) == 32
    assert isinstance(body["objects"], list)


def test_upload_objects_ranked(client):
    img = np.full((20, 20), 10.0, dtype=np.float32)
    img[2, 2] = 1e5
    img[10:12, 10:12] = 1e5
    resp = upload_npy(client, img)
    objects = resp.json()["objects"]
    assert len(objects) >= 2
    counts = [o["pixel_count"] for o in objects]
    assert counts == sorted(counts, reverse=True)
    for obj in objects:
        assert set(obj) == {"label", "pixel_count", "bbox", "centroid"}


def test_upload_fits_and_download_preserves_bytes(client):
    rng = np.random.default_rng(3)
    img = rng.normal(1000, 10, (9, 11))
    img[4, 5] = 90_000.0
    raw = ref_fits_primary(img.tolist(), bitpix=-64,
                           extra_cards=["OBSERVER= 'TEST    '"])
    resp = client.post("/api/v1/images",
                       files={"file": ("obs.fits", io.BytesIO(raw))},
                       data={"client_uuid": fresh_uuid()})
    assert resp.status_code == 200
    key = resp.json()["key"]
    download = client.get(f"/api/v1/download/{key}")
    assert download.status_code == 200
    assert download.content[:len(raw)] == raw
    doc = load_fits(download.content)
    assert find_extension(doc, "SEG_MASK") is not None
    assert "obs_masked.fits" in download.headers["content-disposition"]


def test_bad_uuid_rejected(client):
    resp = upload_npy(client, make_test_image(), client_uuid="not-a-uuid")
    assert resp.status_code == 400
    assert resp.json()["error"] == "bad_uuid"
    resp2 = upload_npy(client, make_test_image(),
                       client_uuid=uuid.uuid4().hex)  # no dashes: not RFC form
    assert resp2.status_code == 400


def test_corrupt_file_rejected(client):
    resp = client.post("/api/v1/images",
                       files={"file": ("x.fits", io.BytesIO(b"SIMPLE  =  garbage"))},
                       data={"client_uuid": fresh_uuid()})
    assert resp.status_code == 400
    assert resp.json()["error"] == "unparsable_file"
    resp2 = client.post("/api/v1/images",
                        files={"file": ("x.bin", io.BytesIO(b"\x00" * 100))},
                        data={"client_uuid": fresh_uuid()})
    assert resp2.status_code == 400


def test_upload_cap(tmp_path):
    config = ServiceConfig(temp_root=tmp_path / "s", gc_interval=None,
                           max_upload_bytes=1024)
    with TestClient(create_app(config)) as client:
        resp = upload_npy(client, np.zeros((64, 64), dtype=np.float32))
        assert resp.status_code == 413
        assert resp.json()["error"] == "file_too_large"


def test_duplicate_uploads_get_distinct_sessions(client):
    img = make_test_image(7)
    first = upload_npy(client, img).json()
    second = upload_npy(client, img).json()
    assert first["key"] != second["key"]
    for body in (first, second):
        frame_resp = client.get(f"/api/v1/frame/{body['key']}")
        assert frame_resp.status_code == 200


def test_frame_round_trip(client):
    img = make_test_image(5, shape=(8, 6))
    key = upload_npy(client, img).json()["key"]
    resp = client.get(f"/api/v1/frame/{key}")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "application/octet-stream"
    got_img, got_prob = decode_frame(resp.content)
    assert np.array_equal(got_img, img)
    assert got_prob.shape == img.shape
    assert float(got_prob.max()) <= 1.0


def test_unknown_key_404(client):
    assert client.get("/api/v1/frame/" + "0" * 32).status_code == 404
    assert client.get("/api/v1/download/" + "0" * 32).status_code == 404
    assert client.post("/api/v1/mask/" + "0" * 32, json={}).status_code == 404


def test_mask_post_and_download_compose(client):
    img = make_test_image(11, shape=(6, 8))
    body = upload_npy(client, img).json()
    key = body["key"]
    # force the whole overlay off: final mask must be empty
    resp = client.post(f"/api/v1/mask/{key}", json={
        "width": 8, "height": 6, "threshold": 0.5, "dilation": 1,
        "runs": [[0, 48, 2]],
    })
    assert resp.status_code == 204
    download = client.get(f"/api/v1/download/{key}")
    doc = load_fits(download.content)
    mask = decode_image_hdu(find_extension(doc, "SEG_MASK"))
    assert not mask.any()


def test_mask_identity_edit_equals_default(client):
    img = make_test_image(13, shape=(10, 10))
    key = upload_npy(client, img).json()["key"]
    baseline_doc = load_fits(client.get(f"/api/v1/download/{key}").content)
    default_mask = decode_image_hdu(find_extension(baseline_doc, "SEG_MASK"))
    resp = client.post(f"/api/v1/mask/{key}", json={
        "width": 10, "height": 10, "threshold": 0.5, "dilation": 0, "runs": [],
    })
    assert resp.status_code == 204
    doc = load_fits(client.get(f"/api/v1/download/{key}").content)
    mask = decode_image_hdu(find_extension(doc, "SEG_MASK"))
    assert np.array_equal(mask, default_mask)


def test_mask_validation_errors(client):
    img = make_test_image(17, shape=(4, 4))
    key = upload_npy(client, img).json()["key"]
    bad_dims = client.post(f"/api/v1/mask/{key}", json={
        "width": 5, "height": 4, "threshold": 0.5, "dilation": 0, "runs": []})
    assert bad_dims.status_code == 400
    assert bad_dims.json()["error"] == "dimension_mismatch"
    bad_rle = client.post(f"/api/v1/mask/{key}", json={
        "width": 4, "height": 4, "threshold": 0.5, "dilation": 0,
        "runs": [[0, 17, 1]]})
    assert bad_rle.status_code == 400
    assert bad_rle.json()["error"] == "malformed_rle"
    not_json = client.post(f"/api/v1/mask/{key}", content=b"overlay")
    assert not_json.status_code == 400


def test_expired_session_410(client):
    img = make_test_image(19, shape=(4, 4))
    key = upload_npy(client, img).json()["key"]
    registry = client.app.state.registry
    record = registry.get(key)
    assert record.temp_dir.exists()
    expired = registry.session_gc(now=time.time() + 7200.0, ttl=3600.0)
    assert expired == 1
    assert not record.temp_dir.exists()
    assert client.get(f"/api/v1/frame/{key}").status_code == 410
    assert client.get(f"/api/v1/download/{key}").status_code == 410
    # second pass is a no-op
    assert registry.session_gc(now=time.time() + 7200.0, ttl=3600.0) == 0


def test_gc_leaves_fresh_sessions(client):
    img = make_test_image(23, shape=(4, 4))
    key = upload_npy(client, img).json()["key"]
    registry = client.app.state.registry
    assert registry.session_gc(ttl=86400.0) == 0
    assert client.get(f"/api/v1/frame/{key}").status_code == 200


def test_detector_query_parameter(client):
    img = make_test_image(29, shape=(8, 8))
    resp = upload_npy(client, img, params={"detector": "baseline:window=3"})
    assert resp.status_code == 200
    bad = upload_npy(client, img, params={"detector": "quantum"})
    assert bad.status_code == 400


def test_all_nan_upload_rejected(client):
    img = np.full((4, 4), np.nan, dtype=np.float32)
    resp = upload_npy(client, img)
    assert resp.status_code == 400


def test_detector_busy_503(tmp_path, monkeypatch):
    import threading

    from tinyseg import service as service_mod

    config = ServiceConfig(temp_root=tmp_path / "s", gc_interval=None,
                           worker_pool_size=1, detector_queue_timeout=0.0)
    app = create_app(config)

    release = threading.Event()
    original = service_mod.detect

    def slow_detect(spec, img, source_doc=None):
        release.wait(5.0)
        return original(spec, img, source_doc=source_doc)

    monkeypatch.setattr(service_mod, "detect", slow_detect)
    with TestClient(app) as client:
        results = {}

        def first_upload():
            results["first"] = upload_npy(client, make_test_image(31))

        worker = threading.Thread(target=first_upload)
        worker.start()
        time.sleep(0.3)  # let the first upload occupy the only slot
        second = upload_npy(client, make_test_image(37))
        release.set()
        worker.join()
        assert results["first"].status_code == 200
        assert second.status_code == 503
        assert second.json()["error"] == "detector_busy"
