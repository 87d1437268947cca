"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with -s (or read the -v result lines) to see one PASS line per
criterion. These are intentionally heavier than the unit suites: the
concurrency soak alone runs for 60 seconds.
"""

from __future__ import annotations

import hashlib
import io
import random
import socket
import threading
import time
import uuid

import numpy as np
import pytest

from tinyseg.detect import baseline_probability
from tinyseg.fits import (
    decode_image_hdu,
    find_extension,
    load_fits,
    mask_extension_bytes,
    wrap_image,
)
from tinyseg.frame import decode_frame, encode_frame
from tinyseg.maskops import apply_overlay, connected_components, dilate, threshold
from tinyseg.npyio import load_npy, serialize_npy
from tinyseg.pipeline import (
    AUTO_LIMITS,
    CURVE,
    DILATE,
    OVERLAY,
    RAW_CLIP,
    SIGMA_CLIP,
    THRESHOLD,
    Pipeline,
)
from tinyseg.raster import FORCE_OFF, FORCE_ON
from tinyseg.rle import decode_overlay_rle
from tinyseg.scale import zscale_limits
from tinyseg.service import ServiceConfig, create_app
from tinyseg.stats import sigma_clip_bounds
from tinyseg.workflow import compose_final_mask

from .oracles import (
    flood_components,
    frame_decode_oracle,
    ref_fits_primary,
    sigma_clip_oracle,
    zscale_oracle,
)


@pytest.fixture
def announce(capsys):
    def _announce(line: str):
        with capsys.disabled():
            print(f"\n[ACCEPTANCE] {line}")
    return _announce


# --- 1. performance ----------------------------------------------------------

def test_c1_four_megapixel_under_three_seconds(tmp_path, announce):
    """2000x2000 f32: upload -> baseline detect -> objects -> frame encode,
    median of 5 runs <= 3.0 s."""
    from fastapi.testclient import TestClient

    rng = np.random.default_rng(2024)
    img = rng.normal(1200.0, 20.0, (2000, 2000)).astype(np.float32)
    ys = rng.integers(3, 1997, 300)
    xs = rng.integers(3, 1997, 300)
    img[ys, xs] += 5000.0
    payload = serialize_npy(img)

    config = ServiceConfig(temp_root=tmp_path / "s", gc_interval=None)
    timings = []
    with TestClient(create_app(config)) as client:
        for _ in range(5):
            start = time.perf_counter()
            resp = client.post(
                "/api/v1/images",
                files={"file": ("big.npy", io.BytesIO(payload))},
                data={"client_uuid": str(uuid.uuid4())},
            )
            assert resp.status_code == 200
            key = resp.json()["key"]
            frame_resp = client.get(f"/api/v1/frame/{key}")
            assert frame_resp.status_code == 200
            timings.append(time.perf_counter() - start)
            assert len(resp.json()["objects"]) >= 200
    median = sorted(timings)[2]
    announce(f"C1 performance 4MP pipeline: median {median:.2f}s "
             f"(runs: {', '.join(f'{t:.2f}' for t in timings)}): "
             f"{'PASS' if median <= 3.0 else 'FAIL'}")
    assert median <= 3.0


# --- 2. zscale oracle equivalence ---------------------------------------------

def _zscale_corpus():
    specs = []
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        shape = (int(rng.integers(30, 120)), int(rng.integers(30, 120)))
        base = rng.uniform(-500, 2000)
        img = rng.normal(base, rng.uniform(0.5, 40), shape)
        kind = seed % 4
        if kind == 1:  # gradient
            img += np.linspace(0, rng.uniform(10, 300), shape[1])[None, :]
        elif kind == 2:  # point sources
            for _ in range(int(rng.integers(3, 15))):
                y, x = rng.integers(1, shape[0] - 1), rng.integers(1, shape[1] - 1)
                img[y, x] += rng.uniform(100, 5000)
        elif kind == 3:  # up to 1% extreme outliers
            flat = img.reshape(-1)
            n_out = max(1, int(flat.size * rng.uniform(0.001, 0.01)))
            flat[rng.integers(0, flat.size, n_out)] = rng.uniform(1e5, 1e6)
        specs.append(img.astype(np.float32))
    return specs


def test_c2_zscale_matches_independent_oracle(announce):
    start = time.perf_counter()
    worst = 0.0
    for img in _zscale_corpus():
        limits = zscale_limits(img)
        z1o, z2o = zscale_oracle(img)
        for got, want in ((limits.z1, z1o), (limits.z2, z2o)):
            rel = abs(got - want) / max(1.0, abs(want))
            worst = max(worst, rel)
            assert rel <= 1e-4, f"zscale mismatch: {got} vs {want}"
    elapsed = time.perf_counter() - start
    announce(f"C2 zscale oracle (50 images, worst rel err {worst:.2e}, "
             f"{elapsed:.1f}s): PASS")
    assert elapsed < 10.0


# --- 3. sigma-clip oracle ------------------------------------------------------

def test_c3_sigma_clip_matches_bruteforce_exactly(announce):
    for seed in range(100):
        rng = np.random.default_rng(2000 + seed)
        n = int(rng.integers(1, 4097))
        values = rng.normal(rng.uniform(-100, 100), rng.uniform(0.01, 50), n)
        style = seed % 3
        if style == 1:
            values[rng.integers(0, n, max(1, n // 50))] *= 1000
        elif style == 2:
            values = np.round(values)  # heavy ties
        values = values.astype(np.float32)
        k = float(rng.uniform(1.0, 4.0))
        iters = int(rng.integers(1, 7))
        bounds = sigma_clip_bounds(values.reshape(1, -1), k=k, max_iters=iters)
        expected = sigma_clip_oracle(values, k=k, max_iters=iters)
        assert (bounds.lo, bounds.hi) == expected, f"seed {seed}"
    announce("C3 sigma-clip oracle (100 arrays, exact): PASS")


# --- 4. mask algebra -----------------------------------------------------------

def test_c4_mask_algebra_properties(announce):
    rng = np.random.default_rng(31337)
    for case in range(1000):
        h = int(rng.integers(4, 20))
        w = int(rng.integers(4, 20))
        prob = rng.random((h, w)).astype(np.float32)
        t1, t2 = sorted(rng.random(2).tolist())
        k1, k2 = sorted(rng.integers(0, 4, 2).tolist())
        overlay = rng.choice([0, 0, 0, 1, 2], size=(h, w)).astype(np.uint8)

        low, high = threshold(prob, t1), threshold(prob, t2)
        assert ((high == 1) <= (low == 1)).all()

        mask = threshold(prob, t1)
        d1, d2 = dilate(mask, k1), dilate(mask, k2)
        assert ((mask == 1) <= (d1 == 1)).all()
        assert ((d1 == 1) <= (d2 == 1)).all()
        split = dilate(dilate(mask, k1), k2 - k1)
        assert np.array_equal(split, d2)

        once = apply_overlay(mask, overlay)
        assert np.array_equal(apply_overlay(once, overlay), once)

        final = apply_overlay(dilate(threshold(prob, t2), k2), overlay)
        assert (final[overlay == FORCE_ON] == 1).all()
        assert (final[overlay == FORCE_OFF] == 0).all()

    for case in range(200):
        h = int(rng.integers(1, 33))
        w = int(rng.integers(1, 33))
        mask = (rng.random((h, w)) < rng.uniform(0.05, 0.5)).astype(np.uint8)
        regions = connected_components(mask)
        reference = flood_components(mask)
        assert sum(r.pixel_count for r in regions) == int(mask.sum())
        assert len(regions) == len(reference)
        got = sorted((r.pixel_count, *r.bbox) for r in regions)
        want = sorted(
            (len(px),
             min(p[0] for p in px), min(p[1] for p in px),
             max(p[0] for p in px), max(p[1] for p in px))
            for px in reference)
        assert got == want
    announce("C4 mask algebra (1000 property cases + 200 CC oracle): PASS")


# --- 5. pipeline minimal invalidation -------------------------------------------

_IMAGE_STAGES = [RAW_CLIP, SIGMA_CLIP, AUTO_LIMITS, CURVE]
_MASK_STAGES = [THRESHOLD, DILATE, OVERLAY]
_SUFFIXES = {
    RAW_CLIP: ["raw_clip", "sigma_clip", "auto_limits", "curve", "quantize"],
    SIGMA_CLIP: ["sigma_clip", "auto_limits", "curve", "quantize"],
    AUTO_LIMITS: ["auto_limits", "curve", "quantize"],
    CURVE: ["curve", "quantize"],
    THRESHOLD: ["threshold", "dilate", "overlay"],
    DILATE: ["dilate", "overlay"],
    OVERLAY: ["overlay"],
}


def _random_stage_value(rng, stage, shape):
    if stage == RAW_CLIP:
        lo, hi = sorted(rng.normal(1000, 40, 2).tolist())
        return (lo, hi)
    if stage == SIGMA_CLIP:
        return float(rng.uniform(1.5, 4.0))
    if stage == AUTO_LIMITS:
        mode = ["zscale", "minmax", "manual"][int(rng.integers(0, 3))]
        if mode == "manual":
            lo, hi = sorted(rng.normal(1000, 30, 2).tolist())
            return (mode, (lo, hi))
        return (mode, None)
    if stage == CURVE:
        return ["linear", "log", "sqrt"][int(rng.integers(0, 3))]
    if stage == THRESHOLD:
        return float(rng.random())
    if stage == DILATE:
        return int(rng.integers(0, 4))
    overlay = rng.choice([0, 0, 0, 1, 2], size=shape).astype(np.uint8)
    return overlay


def test_c5_minimal_invalidation_vs_full_recompute(announce):
    rng = np.random.default_rng(777)
    base_rng = np.random.default_rng(778)
    img = base_rng.normal(1000, 25, (16, 20)).astype(np.float32)
    img[3, 3] = np.nan
    prob = base_rng.random((16, 20)).astype(np.float32)
    stages = _IMAGE_STAGES + _MASK_STAGES

    for seq in range(500):
        pipe = Pipeline()
        pipe.load_source(img, prob)
        pipe.render()
        for _ in range(int(rng.integers(1, 7))):
            stage = stages[int(rng.integers(0, len(stages)))]
            value = _random_stage_value(rng, stage, img.shape)
            old = pipe.get_param(stage)
            changed = not _equal_params(old, value)
            before = pipe.counter_snapshot()
            pipe.set_param(stage, value)
            display, mask = pipe.render()
            diff = {k: v - before[k] for k, v in pipe.counter_snapshot().items()}
            expected = set(_SUFFIXES[stage]) if changed else set()
            assert {k for k, v in diff.items() if v} == expected, \
                f"seq {seq}: stage {stage} recomputed {diff}"
            assert all(v in (0, 1) for v in diff.values())

        # recompute-everything oracle: fresh pipeline, same final parameters
        fresh = Pipeline()
        fresh.load_source(img, prob)
        for stage in stages:
            fresh.set_param(stage, pipe.get_param(stage))
        display2, mask2 = fresh.render()
        assert display.tobytes() == display2.tobytes(), f"seq {seq}"
        assert mask.tobytes() == mask2.tobytes(), f"seq {seq}"
    announce("C5 pipeline minimal invalidation (500 sequences): PASS")


def _equal_params(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (isinstance(a, np.ndarray) and isinstance(b, np.ndarray)
                and a.shape == b.shape and bool((a == b).all()))
    return a == b


# --- 6. FITS/NPY round trips ----------------------------------------------------

def test_c6_format_round_trips(tmp_path, announce):
    rng = np.random.default_rng(606)
    corpus = []
    for bitpix in (8, 16, 32, -32, -64):
        for variant in range(4):
            if bitpix == 8:
                values = rng.integers(0, 256, (7 + variant, 9)).tolist()
            elif bitpix > 0:
                lim = 2 ** (bitpix - 1)
                values = rng.integers(-lim, lim - 1, (7 + variant, 9)).tolist()
            else:
                values = rng.normal(0, 1e3, (7 + variant, 9)).tolist()
            extras = []
            if variant % 2:
                extras = ["HISTORY generated for round-trip corpus",
                          "OBSERVER= 'O''BRIEN  '          / quoting"]
            raw = ref_fits_primary(values, bitpix=bitpix,
                                   bscale=1.0 if variant % 2 else None,
                                   bzero=32768.0 if bitpix == 16 and variant == 2 else None,
                                   extra_cards=extras)
            if variant == 3:
                raw += mask_extension_bytes(
                    (rng.random((7 + variant, 9)) < 0.2).astype(np.uint8), "EXTRA")
            corpus.append(raw)
    assert len(corpus) >= 20
    for raw in corpus:
        assert load_fits(raw).tobytes() == raw

    for seed in range(10):
        img = np.random.default_rng(seed).normal(size=(5, 6)).astype(np.float32)
        assert load_npy(serialize_npy(img)).tobytes() == img.tobytes()

    # upload -> download preserves original HDU bytes and appends a
    # parseable mask extension
    from fastapi.testclient import TestClient
    config = ServiceConfig(temp_root=tmp_path / "s", gc_interval=None)
    with TestClient(create_app(config)) as client:
        for raw in corpus[:3]:
            resp = client.post("/api/v1/images",
                               files={"file": ("f.fits", io.BytesIO(raw))},
                               data={"client_uuid": str(uuid.uuid4())})
            assert resp.status_code == 200
            out = client.get(f"/api/v1/download/{resp.json()['key']}").content
            assert out[:len(raw)] == raw
            doc = load_fits(out)
            ext = find_extension(doc, "SEG_MASK")
            assert ext is not None
            decoded = decode_image_hdu(ext)
            assert set(np.unique(decoded)).issubset({0.0, 1.0})
    announce(f"C6 FITS/NPY round trips ({len(corpus)} FITS + 10 NPY files): PASS")


# --- 7. session isolation soak ---------------------------------------------------

SOAK_SECONDS = 60.0


def _start_server(app):
    import uvicorn

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning",
                                           access_log=False))
    thread = threading.Thread(target=server.run, kwargs={"sockets": [sock]},
                              daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server failed to start")
        time.sleep(0.02)
    return server, thread, port


def test_c7_session_isolation_soak(tmp_path, announce):
    """8 concurrent clients interleaving frame/mask/download for 60 s:
    zero 5xx, zero cross-session leaks, every download matches its upload."""
    import httpx

    config = ServiceConfig(temp_root=tmp_path / "soak", gc_interval=None)
    server, thread, port = _start_server(create_app(config))
    base = f"http://127.0.0.1:{port}"
    errors: list[str] = []
    request_counts = [0] * 8

    def client_task(cid: int):
        rng = np.random.default_rng(9000 + cid)
        rnd = random.Random(cid)
        # distinct checksummed pattern per client
        img = rng.normal(100.0 * (cid + 1), 5.0, (48, 48)).astype(np.float32)
        img[0, 0] = np.float32(cid + 1) * 7.0
        checksum = hashlib.sha256(img.tobytes()).hexdigest()
        raw = serialize_npy(img)
        wrapped = wrap_image(img).tobytes()
        try:
            with httpx.Client(base_url=base, timeout=30.0) as http:
                resp = http.post(
                    "/api/v1/images",
                    files={"file": (f"client{cid}.npy", raw)},
                    data={"client_uuid": str(uuid.UUID(int=cid))},
                )
                if resp.status_code != 200:
                    errors.append(f"client {cid}: upload {resp.status_code}")
                    return
                key = resp.json()["key"]
                state = {"threshold": 0.5, "dilation": 0, "runs": []}
                prob = None
                deadline = time.time() + SOAK_SECONDS
                while time.time() < deadline:
                    action = rnd.choice(["frame", "mask", "download"])
                    if action == "frame":
                        r = http.get(f"/api/v1/frame/{key}")
                        if r.status_code != 200:
                            errors.append(f"client {cid}: frame {r.status_code}")
                            return
                        got_img, got_prob = decode_frame(r.content)
                        if hashlib.sha256(got_img.tobytes()).hexdigest() != checksum:
                            errors.append(f"client {cid}: foreign image in frame")
                            return
                        prob = got_prob
                    elif action == "mask":
                        state = {
                            "threshold": rnd.random(),
                            "dilation": rnd.randint(0, 3),
                            "runs": [[rnd.randint(0, 48 * 48 - 10),
                                      rnd.randint(1, 9),
                                      rnd.randint(1, 2)]],
                        }
                        r = http.post(f"/api/v1/mask/{key}", json={
                            "width": 48, "height": 48, **state})
                        if r.status_code != 204:
                            errors.append(f"client {cid}: mask {r.status_code}")
                            return
                    else:
                        r = http.get(f"/api/v1/download/{key}")
                        if r.status_code != 200:
                            errors.append(f"client {cid}: download {r.status_code}")
                            return
                        if r.content[:len(wrapped)] != wrapped:
                            errors.append(f"client {cid}: foreign bytes in download")
                            return
                        if prob is not None:
                            overlay = decode_overlay_rle(
                                [tuple(x) for x in state["runs"]], 48, 48)
                            want = compose_final_mask(
                                prob, state["threshold"], state["dilation"], overlay)
                            doc = load_fits(r.content)
                            got = decode_image_hdu(find_extension(doc, "SEG_MASK"))
                            if not np.array_equal(got, want.astype(np.float32)):
                                errors.append(f"client {cid}: mask mismatch")
                                return
                    request_counts[cid] += 1
        except Exception as exc:  # noqa: BLE001 - soak must report, not die
            errors.append(f"client {cid}: {type(exc).__name__}: {exc}")

    threads = [threading.Thread(target=client_task, args=(cid,))
               for cid in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    server.should_exit = True
    thread.join(timeout=10)

    assert not errors, errors
    total = sum(request_counts)
    assert min(request_counts) > 0
    announce(f"C7 session isolation soak (8 clients, {SOAK_SECONDS:.0f}s, "
             f"{total} requests, zero leaks/5xx): PASS")


# --- 8. FrameV1 codec -------------------------------------------------------------

def test_c8_frame_codec(announce):
    rng = np.random.default_rng(808)
    for trial in range(60):
        h = int(rng.integers(1, 64))
        w = int(rng.integers(1, 64))
        compressible = trial % 2 == 0
        if compressible:
            image = np.full((h, w), float(trial), dtype=np.float32)
        else:
            image = rng.normal(size=(h, w)).astype(np.float32)
        prob = rng.random((h, w)).astype(np.float32)
        for try_compress in (False, True):
            blob = encode_frame(image, prob, try_compress=try_compress)
            out_img, out_prob = decode_frame(blob)
            assert out_img.tobytes() == image.tobytes()
            assert out_prob.tobytes() == prob.tobytes()
            ref_img, ref_prob = frame_decode_oracle(blob)
            assert np.array_equal(np.array(ref_img, dtype=np.float32), image)
            assert np.array_equal(np.array(ref_prob, dtype=np.float32), prob)

    image = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    blob = encode_frame(image, np.zeros((2, 2), np.float32), try_compress=False)
    expected = (b"TSEG" + bytes([1, 0, 0, 0])
                + (2).to_bytes(4, "little") + (2).to_bytes(4, "little"))
    assert blob[:16] == expected
    import struct
    assert blob[16:] == struct.pack("<8f", 1, 2, 3, 4, 0, 0, 0, 0)
    announce("C8 FrameV1 codec (random dims, both flags, 2x2 layout): PASS")


# --- 9. baseline detector smoke ----------------------------------------------------

def test_c9_baseline_smoke_hot_pixels(announce):
    """Not the paper-model metrics (those belong to the out-of-scope deep
    model): the classical stand-in must flag >= 95% of 20-sigma injections
    with zero false positives at prob >= 0.5 on bounded-noise flat fields."""
    total_injected = 0
    total_flagged = 0
    total_false = 0
    for trial in range(3):
        rng = np.random.default_rng(900 + trial)
        noise = rng.normal(0.0, 2.0, (192, 192))
        noise = np.clip(noise, -8.0, 8.0)  # detector-style bounded tails
        img = (1000.0 + noise).astype(np.float32)

        # robust sigma of the clean residual map defines the injection level
        residual = img.astype(np.float64) - _median5(img)
        center = np.median(residual)
        sigma = 1.4826 * np.median(np.abs(residual - center))

        inject = []
        for y in range(8, 184, 12):
            for x in range(8, 184, 12):
                img[y, x] = img[y, x] + np.float32(20.0 * sigma)
                inject.append((y, x))
        prob = baseline_probability(img, window=5)
        mask = prob >= 0.5
        hits = sum(1 for y, x in inject if mask[y, x])
        injected_set = set(inject)
        false_alarms = [(y, x) for y, x in zip(*np.nonzero(mask))
                        if (y, x) not in injected_set]
        total_injected += len(inject)
        total_flagged += hits
        total_false += len(false_alarms)

    rate = total_flagged / total_injected
    announce(f"C9 baseline smoke: {rate:.1%} of {total_injected} injections "
             f"flagged, {total_false} false positives: "
             f"{'PASS' if rate >= 0.95 and total_false == 0 else 'FAIL'}")
    assert rate >= 0.95
    assert total_false == 0


def _median5(img):
    from scipy import ndimage
    return ndimage.median_filter(img, size=5, mode="nearest").astype(np.float64)
