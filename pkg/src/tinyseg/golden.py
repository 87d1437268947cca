"""Golden-vector suite: canonical (input, parameters, expected bytes) cases.

The browser re-implements the display pipeline; these fixtures are how it
proves byte-identical behavior. Every (curve x limits-mode) combination is
covered on five synthetic images that exercise flat fields, gradients,
point sources, hard outliers and non-finite pixels.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import scale
from .npyio import serialize_npy
from .pipeline import (
    AUTO_LIMITS,
    CURVE,
    DILATE,
    OVERLAY,
    RAW_CLIP,
    SIGMA_CLIP,
    THRESHOLD,
    Pipeline,
)
from .rle import decode_overlay_rle

SUITE_SEED = 20260809


def suite_images(seed: int = SUITE_SEED) -> list[tuple[np.ndarray, np.ndarray]]:
    """Five (image, probability-map) pairs with fixed statistics."""
    rng = np.random.default_rng(seed)
    pairs = []

    def prob_for(img, hot_frac=0.01):
        p = rng.uniform(0.0, 0.45, img.shape)
        hot = rng.random(img.shape) < hot_frac
        p[hot] = rng.uniform(0.55, 1.0, int(hot.sum()))
        return p.astype(np.float32)

    flat = rng.normal(1000.0, 15.0, (96, 128)).astype(np.float32)
    pairs.append((flat, prob_for(flat)))

    yy, xx = np.mgrid[0:80, 0:120]
    gradient = (xx * 3.5 + yy * 1.25 + rng.normal(0, 2.0, (80, 120))).astype(np.float32)
    pairs.append((gradient, prob_for(gradient)))

    stars = rng.normal(200.0, 8.0, (100, 100)).astype(np.float32)
    for _ in range(12):
        cy, cx = rng.integers(5, 95, 2)
        stars[cy - 1:cy + 2, cx - 1:cx + 2] += rng.uniform(500, 4000)
    pairs.append((stars, prob_for(stars)))

    outliers = rng.normal(0.0, 1.0, (64, 64)).astype(np.float32)
    spots = rng.random(outliers.shape) < 0.01
    outliers[spots] = 1e4
    pairs.append((outliers, prob_for(outliers, hot_frac=0.03)))

    speckled = rng.normal(-50.0, 30.0, (72, 96)).astype(np.float32)
    bad = rng.random(speckled.shape) < 0.005
    speckled[bad] = np.nan
    speckled[0, 0] = np.inf
    speckled[-1, -1] = -np.inf
    pairs.append((speckled, prob_for(speckled)))

    return pairs


def case_parameters(index: int, img: np.ndarray) -> dict:
    """Deterministic parameter cycle so the grid also varies the mask path."""
    curves = [scale.LINEAR, scale.LOG, scale.SQRT]
    modes = [scale.ZSCALE, scale.MINMAX, scale.MANUAL]
    curve = curves[index % 3]
    mode = modes[(index // 3) % 3]
    thresholds = [0.5, 0.3, 0.7, 0.5]
    dilations = [0, 1, 2, 3]
    total = img.size
    overlays = [
        [],
        [[0, min(5, total), 1]],
        [[total // 2, min(9, total - total // 2), 2]],
        [[1, 3, 1], [total - 4, 3, 2]],
    ]
    params: dict = {
        "curve": curve,
        "limits_mode": mode,
        "manual_limits": None,
        "raw_clip": None,
        "sigma_k": 3.0 if index % 2 == 0 else 2.5,
        "threshold": thresholds[index % 4],
        "dilation": dilations[index % 4],
        "overlay_runs": overlays[index % 4],
    }
    if mode == scale.MANUAL:
        finite = img[np.isfinite(img)]
        lo = float(np.percentile(finite, 5.0))
        hi = float(np.percentile(finite, 95.0))
        params["manual_limits"] = [lo, max(hi, lo)]
    if index % 5 == 4:
        finite = img[np.isfinite(img)]
        params["raw_clip"] = [float(finite.min()), float(np.percentile(finite, 99.0))]
    return params


def run_case(img: np.ndarray, prob: np.ndarray, params: dict) -> tuple[np.ndarray, np.ndarray]:
    """Core-pipeline output for one golden case."""
    pipe = Pipeline()
    pipe.load_source(img, prob)
    if params["raw_clip"] is not None:
        pipe.set_param(RAW_CLIP, tuple(params["raw_clip"]))
    pipe.set_param(SIGMA_CLIP, params["sigma_k"])
    if params["limits_mode"] == scale.MANUAL:
        pipe.set_param(AUTO_LIMITS, (scale.MANUAL, tuple(params["manual_limits"])))
    else:
        pipe.set_param(AUTO_LIMITS, (params["limits_mode"], None))
    pipe.set_param(CURVE, params["curve"])
    pipe.set_param(THRESHOLD, params["threshold"])
    pipe.set_param(DILATE, params["dilation"])
    height, width = img.shape
    runs = [tuple(run) for run in params["overlay_runs"]]
    pipe.set_param(OVERLAY, decode_overlay_rle(runs, width, height))
    return pipe.render()


def generate_suite(outdir: str | Path, seed: int = SUITE_SEED) -> list[str]:
    """Write the full suite; returns the case directory names."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cases = []
    index = 0
    for img_id, (img, prob) in enumerate(suite_images(seed)):
        for _ in range(9):  # full curve x limits-mode grid per image
            params = case_parameters(index, img)
            display, mask = run_case(img, prob, params)
            name = f"case_{index:03d}"
            case_dir = outdir / name
            case_dir.mkdir(exist_ok=True)
            (case_dir / "image.npy").write_bytes(serialize_npy(img))
            (case_dir / "prob.npy").write_bytes(serialize_npy(prob))
            (case_dir / "display.bin").write_bytes(display.tobytes())
            (case_dir / "mask.bin").write_bytes(mask.tobytes())
            meta = dict(params)
            meta.update({"image_id": img_id, "width": img.shape[1],
                         "height": img.shape[0]})
            (case_dir / "params.json").write_text(json.dumps(meta, indent=1))
            cases.append(name)
            index += 1
    (outdir / "manifest.json").write_text(json.dumps({"cases": cases}, indent=1))
    return cases
