"""Raster containers and conventions.

Images are plain 2-D C-contiguous numpy arrays: float32 for science data and
probability maps, uint8 for binary masks and the trinary edit overlay.
Helpers here validate and normalize; they never copy when the input already
conforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Edit-overlay pixel states. FORCE_ON renders green, FORCE_OFF red.
NEUTRAL = 0
FORCE_ON = 1
FORCE_OFF = 2


def as_image_f32(data) -> np.ndarray:
    """Coerce to a 2-D float32 raster with at least one pixel."""
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a 2-D raster with >=1 pixel, got shape {arr.shape}")
    return arr


def as_prob_map(data) -> np.ndarray:
    """Coerce to a float32 probability raster; finite values must be in [0, 1]."""
    arr = as_image_f32(data)
    finite = arr[np.isfinite(arr)]
    if finite.size and (finite.min() < 0.0 or finite.max() > 1.0):
        raise ValueError("probability map has finite values outside [0, 1]")
    return arr


def as_binary_mask(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {arr.shape}")
    if arr.size and arr.max() > 1:
        raise ValueError("binary mask values must be 0 or 1")
    return arr


def new_overlay(height: int, width: int) -> np.ndarray:
    """All-NEUTRAL edit overlay matching an image of the given size."""
    return np.zeros((height, width), dtype=np.uint8)


def as_overlay(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D overlay, got shape {arr.shape}")
    if arr.size and arr.max() > FORCE_OFF:
        raise ValueError("overlay values must be NEUTRAL, FORCE_ON or FORCE_OFF")
    return arr


@dataclass(frozen=True)
class ClipBounds:
    """Closed value interval in data units."""
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo <= self.hi):
            raise ValueError(f"invalid clip bounds ({self.lo}, {self.hi})")


@dataclass(frozen=True)
class ObjectRegion:
    """One 8-connected component of a binary mask.

    bbox is (x_min, y_min, x_max, y_max) inclusive; centroid is the pixel
    coordinate mean (x, y).
    """
    label: int
    pixel_count: int
    bbox: tuple[int, int, int, int]
    centroid: tuple[float, float]
