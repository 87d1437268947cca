"""Ordered, buffered processing pipeline with minimal re-execution.

Two independent stage chains share no buffers:

    image: raw_clip -> sigma_clip -> auto_limits -> curve -> quantize
    mask:  threshold -> dilate -> overlay

Each stage caches its output; changing a parameter dirties only that stage
and everything after it on the same chain, so a threshold tweak never
re-runs the stretch. The probe reads the untouched source rasters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import maskops, scale, stats
from .errors import (
    AllNonFinite,
    NoSourceLoaded,
    OutOfBounds,
    TooFewPixels,
    UnknownStage,
    ValueOutOfDomain,
)
from .raster import as_image_f32, as_overlay, as_prob_map, new_overlay

IMAGE_PATH = "image"
MASK_PATH = "mask"

RAW_CLIP = "raw_clip"
SIGMA_CLIP = "sigma_clip"
AUTO_LIMITS = "auto_limits"
CURVE = "curve"
QUANTIZE = "quantize"
THRESHOLD = "threshold"
DILATE = "dilate"
OVERLAY = "overlay"

DEFAULT_SIGMA_K = 3.0
SIGMA_CLIP_ITERS = 5


@dataclass
class ProbeResult:
    x: int
    y: int
    raw_value: float
    probability: float


@dataclass
class _Stage:
    stage_id: str
    path: str
    param: Any
    validate: Callable[[Any], Any]
    compute: Callable[["Pipeline", "_Stage"], Any]


def _validate_raw_clip(value):
    if value is None:
        return None
    lo, hi = float(value[0]), float(value[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
        raise ValueOutOfDomain(f"raw clip bounds ({lo}, {hi})")
    return (lo, hi)


def _validate_sigma_k(value):
    k = float(value)
    if not (np.isfinite(k) and k > 0):
        raise ValueOutOfDomain(f"sigma-clip k {k}")
    return k


def _validate_limits_mode(value):
    mode, arg = value
    if mode == scale.MANUAL:
        lo, hi = float(arg[0]), float(arg[1])
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ValueOutOfDomain(f"manual limits ({lo}, {hi})")
        return (mode, (lo, hi))
    if mode in (scale.ZSCALE, scale.MINMAX):
        if arg is not None:
            raise ValueOutOfDomain(f"{mode} limits take no argument")
        return (mode, None)
    raise ValueOutOfDomain(f"unknown limits mode {mode!r}")


def _validate_curve(value):
    if value not in scale.CURVES:
        raise ValueOutOfDomain(f"unknown curve {value!r}")
    return value


def _validate_threshold(value):
    t = float(value)
    if not 0.0 <= t <= 1.0:
        raise ValueOutOfDomain(f"threshold {t} outside [0, 1]")
    return t


def _validate_dilation(value):
    k = int(value)
    if k < 0 or k != value:
        raise ValueOutOfDomain(f"dilation count {value!r}")
    return k


def _no_params(value):
    raise ValueOutOfDomain("stage has no parameters")


class Pipeline:
    """Per-session pipeline state: stage parameters, buffers, counters."""

    def __init__(self):
        self.stages: list[_Stage] = [
            _Stage(RAW_CLIP, IMAGE_PATH, None, _validate_raw_clip, _compute_raw_clip),
            _Stage(SIGMA_CLIP, IMAGE_PATH, DEFAULT_SIGMA_K, _validate_sigma_k,
                   _compute_sigma_clip),
            _Stage(AUTO_LIMITS, IMAGE_PATH, (scale.ZSCALE, None),
                   _validate_limits_mode, _compute_auto_limits),
            _Stage(CURVE, IMAGE_PATH, scale.LINEAR, _validate_curve, _compute_curve),
            _Stage(QUANTIZE, IMAGE_PATH, None, _no_params, _compute_quantize),
            _Stage(THRESHOLD, MASK_PATH, 0.5, _validate_threshold, _compute_threshold),
            _Stage(DILATE, MASK_PATH, 0, _validate_dilation, _compute_dilate),
            _Stage(OVERLAY, MASK_PATH, None, self._validate_overlay, _compute_overlay),
        ]
        self.source_image: np.ndarray | None = None
        self.prob_map: np.ndarray | None = None
        self.buffers: dict[str, Any] = {}
        self.dirty: set[str] = set()
        self.counters: dict[str, int] = {s.stage_id: 0 for s in self.stages}

    # --- setup ------------------------------------------------------------

    def load_source(self, img: np.ndarray, prob: np.ndarray) -> None:
        img = as_image_f32(img)
        prob = as_prob_map(prob)
        if img.shape != prob.shape:
            raise ValueOutOfDomain(
                f"probability map {prob.shape} vs image {img.shape}"
            )
        self.source_image = img
        self.prob_map = prob
        self._stage(OVERLAY).param = new_overlay(*img.shape)
        self.buffers.clear()
        self.dirty = {s.stage_id for s in self.stages}

    def _validate_overlay(self, value):
        overlay = as_overlay(value)
        if self.source_image is not None and overlay.shape != self.source_image.shape:
            raise ValueOutOfDomain(
                f"overlay {overlay.shape} vs image {self.source_image.shape}"
            )
        return overlay

    # --- parameter control --------------------------------------------------

    def _stage(self, stage_id: str) -> _Stage:
        for stage in self.stages:
            if stage.stage_id == stage_id:
                return stage
        raise UnknownStage(stage_id)

    def set_param(self, stage_id: str, value) -> None:
        """Store a stage parameter and dirty its downstream suffix.

        Setting the identical value is a no-op.
        """
        stage = self._stage(stage_id)
        value = stage.validate(value)
        if _params_equal(stage.param, value):
            return
        stage.param = value
        path_stages = [s for s in self.stages if s.path == stage.path]
        index = path_stages.index(stage)
        for downstream in path_stages[index:]:
            self.dirty.add(downstream.stage_id)

    def get_param(self, stage_id: str):
        return self._stage(stage_id).param

    # --- execution -----------------------------------------------------------

    def render(self) -> tuple[np.ndarray, np.ndarray]:
        """Recompute dirty stages in order; return (display u8, mask u8)."""
        if self.source_image is None or self.prob_map is None:
            raise NoSourceLoaded("load an image and probability map first")
        for stage in self.stages:
            if stage.stage_id in self.dirty:
                self.buffers[stage.stage_id] = stage.compute(self, stage)
                self.counters[stage.stage_id] += 1
        self.dirty.clear()
        return self.buffers[QUANTIZE], self.buffers[OVERLAY]

    def probe(self, x: int, y: int) -> ProbeResult:
        """Raw value and detector confidence at a pixel, unaffected by any
        pipeline parameter. Non-finite pixels report probability 0."""
        if self.source_image is None or self.prob_map is None:
            raise NoSourceLoaded("load an image and probability map first")
        height, width = self.source_image.shape
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBounds(f"({x}, {y}) outside {width}x{height}")
        raw = float(self.source_image[y, x])
        if np.isfinite(raw):
            prob = float(self.prob_map[y, x])
            if not np.isfinite(prob):
                prob = 0.0
        else:
            prob = 0.0
        return ProbeResult(x=x, y=y, raw_value=raw, probability=prob)

    # --- introspection ----------------------------------------------------

    def counter_snapshot(self) -> dict[str, int]:
        return dict(self.counters)

    @property
    def display_limits(self) -> scale.ScaleLimits:
        return self.buffers[AUTO_LIMITS]


def _params_equal(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return isinstance(a, np.ndarray) and isinstance(b, np.ndarray) \
            and a.shape == b.shape and bool(np.array_equal(a, b))
    return a == b


# --- stage computations -----------------------------------------------------


def _compute_raw_clip(pipe: Pipeline, stage: _Stage) -> np.ndarray:
    img = pipe.source_image
    if stage.param is None:
        return img
    lo, hi = stage.param
    lo32, hi32 = np.float32(lo), np.float32(hi)
    return np.minimum(np.maximum(img, lo32), hi32).astype(np.float32, copy=False)


def _compute_sigma_clip(pipe: Pipeline, stage: _Stage):
    raw = pipe.buffers[RAW_CLIP]
    try:
        bounds = stats.sigma_clip_bounds(raw, k=stage.param, max_iters=SIGMA_CLIP_ITERS)
    except AllNonFinite:
        # no finite pixel: nothing to clamp
        return raw, None
    bounds32 = stats.bounds_as_f32(bounds)
    return stats.clamp_to_bounds(raw, bounds), bounds32


def _compute_auto_limits(pipe: Pipeline, stage: _Stage) -> scale.ScaleLimits:
    clamped, _ = pipe.buffers[SIGMA_CLIP]
    mode, arg = stage.param
    if mode == scale.MANUAL:
        return scale.ScaleLimits(arg[0], arg[1], scale.MANUAL)
    if mode == scale.MINMAX:
        return scale.minmax_limits(clamped)
    try:
        return scale.zscale_limits(clamped)
    except TooFewPixels:
        # tiny images still deserve a stretch
        return scale.minmax_limits(clamped)


def _compute_curve(pipe: Pipeline, stage: _Stage) -> np.ndarray:
    clamped, _ = pipe.buffers[SIGMA_CLIP]
    limits = pipe.buffers[AUTO_LIMITS]
    return scale.curve_value(scale.normalized(clamped, limits), stage.param)


def _compute_quantize(pipe: Pipeline, stage: _Stage) -> np.ndarray:
    return scale.quantize_u8(pipe.buffers[CURVE])


def _compute_threshold(pipe: Pipeline, stage: _Stage) -> np.ndarray:
    return maskops.threshold(pipe.prob_map, stage.param)


def _compute_dilate(pipe: Pipeline, stage: _Stage) -> np.ndarray:
    return maskops.dilate(pipe.buffers[THRESHOLD], stage.param)


def _compute_overlay(pipe: Pipeline, stage: _Stage) -> np.ndarray:
    overlay = stage.param
    if overlay is None:
        overlay = new_overlay(*pipe.source_image.shape)
    return maskops.apply_overlay(pipe.buffers[DILATE], overlay)
