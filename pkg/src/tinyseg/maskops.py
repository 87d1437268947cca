"""Mask derivation and editing: threshold, dilation, overlay, components.

The edit overlay is a separate trinary raster composited after every global
operation, so pencil decisions survive any threshold or dilation change.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, OutOfBounds, ThresholdOutOfRange
from .raster import FORCE_OFF, FORCE_ON, NEUTRAL, ObjectRegion

EDIT_ADD = "add"
EDIT_DELETE = "delete"
EDIT_CLEAR = "clear"

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def threshold(prob: np.ndarray, t: float = 0.5) -> np.ndarray:
    """Binary mask of pixels with probability >= t (non-finite count as 0).

    The comparison is done in float64 so a stored float32 probability is
    compared exactly, not re-rounded.
    """
    if not 0.0 <= t <= 1.0:
        raise ThresholdOutOfRange(f"threshold {t} outside [0, 1]")
    p = np.asarray(prob).astype(np.float64)
    return (np.isfinite(p) & (p >= float(t))).astype(np.uint8)


def dilate(mask: np.ndarray, iterations: int) -> np.ndarray:
    """Binary dilation by a 3x3 square, `iterations` times, borders clipped."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    m = np.asarray(mask)
    if iterations == 0 or not m.any():
        return m.astype(np.uint8, copy=True)
    out = ndimage.binary_dilation(m.astype(bool), structure=_EIGHT_CONNECTED,
                                  iterations=iterations)
    return out.astype(np.uint8)


def apply_overlay(mask: np.ndarray, overlay: np.ndarray) -> np.ndarray:
    """Composite manual edits over a mask: FORCE_ON -> 1, FORCE_OFF -> 0."""
    mask = np.asarray(mask)
    overlay = np.asarray(overlay)
    if mask.shape != overlay.shape:
        raise DimensionMismatch(
            f"mask {mask.shape} vs overlay {overlay.shape}"
        )
    out = mask.astype(np.uint8, copy=True)
    out[overlay == FORCE_ON] = 1
    out[overlay == FORCE_OFF] = 0
    return out


def pencil_edit(overlay: np.ndarray, x: int, y: int, mode: str) -> np.ndarray:
    """Return a copy of the overlay with one pixel edited."""
    overlay = np.asarray(overlay)
    h, w = overlay.shape
    if not (0 <= x < w and 0 <= y < h):
        raise OutOfBounds(f"({x}, {y}) outside {w}x{h}")
    state = {EDIT_ADD: FORCE_ON, EDIT_DELETE: FORCE_OFF, EDIT_CLEAR: NEUTRAL}[mode]
    out = overlay.copy()
    out[y, x] = state
    return out


def connected_components(mask: np.ndarray) -> list[ObjectRegion]:
    """8-connected components, largest first, ties by (y_min, x_min)."""
    m = np.asarray(mask).astype(bool)
    labels, count = ndimage.label(m, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    # stats from the set pixels only; far cheaper than per-label image passes
    ys, xs = np.nonzero(m)
    labs = labels[ys, xs]
    counts = np.bincount(labs, minlength=count + 1)[1:]
    sum_x = np.bincount(labs, weights=xs, minlength=count + 1)[1:]
    sum_y = np.bincount(labs, weights=ys, minlength=count + 1)[1:]
    x_min = np.full(count + 1, np.iinfo(np.int64).max, dtype=np.int64)
    y_min = np.full(count + 1, np.iinfo(np.int64).max, dtype=np.int64)
    x_max = np.full(count + 1, -1, dtype=np.int64)
    y_max = np.full(count + 1, -1, dtype=np.int64)
    np.minimum.at(x_min, labs, xs)
    np.minimum.at(y_min, labs, ys)
    np.maximum.at(x_max, labs, xs)
    np.maximum.at(y_max, labs, ys)
    regions = []
    for i in range(count):
        n = int(counts[i])
        regions.append(ObjectRegion(
            label=i + 1,
            pixel_count=n,
            bbox=(int(x_min[i + 1]), int(y_min[i + 1]),
                  int(x_max[i + 1]), int(y_max[i + 1])),
            centroid=(float(sum_x[i]) / n, float(sum_y[i]) / n),
        ))
    regions.sort(key=lambda r: (-r.pixel_count, r.bbox[1], r.bbox[0]))
    return regions


def thumbnail_windows(
    regions: list[ObjectRegion],
    img_w: int,
    img_h: int,
    side: int = 64,
    max_n: int = 50,
) -> list[tuple[int, tuple[int, int, int, int]]]:
    """Crop rects (x0, y0, x1, y1 inclusive) centered on region centroids.

    Rects are translated, never shrunk, to stay inside the image; an image
    smaller than `side` yields the whole image.
    """
    if side < 1:
        raise ValueError("side must be >= 1")
    out = []
    for region in regions[:max_n]:
        cx, cy = region.centroid
        if img_w <= side:
            x0, x1 = 0, img_w - 1
        else:
            x0 = min(max(int(np.floor(cx + 0.5)) - side // 2, 0), img_w - side)
            x1 = x0 + side - 1
        if img_h <= side:
            y0, y1 = 0, img_h - 1
        else:
            y0 = min(max(int(np.floor(cy + 0.5)) - side // 2, 0), img_h - side)
            y1 = y0 + side - 1
        out.append((region.label, (x0, y0, x1, y1)))
    return out
