"""Robust statistics over rasters with non-finite pixels excluded.

All reductions go through the pinned-order primitives in `numerics` so the
browser port can reproduce bounds bit for bit.
"""

from __future__ import annotations

import numpy as np

from .errors import AllNonFinite
from .numerics import median_sorted, tree_sum
from .raster import ClipBounds


def finite_values(img: np.ndarray) -> np.ndarray:
    """Finite pixels in row-major order, promoted to float64."""
    flat = np.asarray(img).ravel()
    return flat[np.isfinite(flat)].astype(np.float64)


def sigma_clip_bounds(img: np.ndarray, k: float = 3.0, max_iters: int = 5) -> ClipBounds:
    """Iteratively clip at median +- k * population std until stable.

    Each pass computes the interval from the surviving set, then drops
    values outside it (boundary values survive). Returns the last interval
    computed; rejection of every value also terminates.
    """
    if not k > 0:
        raise ValueError("k must be > 0")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    finite = finite_values(img)
    if finite.size == 0:
        raise AllNonFinite("sigma clip needs at least one finite pixel")

    s = np.sort(finite)
    lo_i, hi_i = 0, s.size
    lo = hi = float(s[0])
    for _ in range(max_iters):
        window = s[lo_i:hi_i]
        n = window.size
        center = median_sorted(window)
        mean = tree_sum(window) / float(n)
        var = tree_sum((window - mean) * (window - mean)) / float(n)
        sd = np.sqrt(var)
        lo = center - k * sd
        hi = center + k * sd
        # survivors of an interval cut stay contiguous in the sorted array
        new_lo = max(int(np.searchsorted(s, lo, side="left")), lo_i)
        new_hi = min(int(np.searchsorted(s, hi, side="right")), hi_i)
        if new_lo >= new_hi:
            break
        if (new_lo, new_hi) == (lo_i, hi_i):
            break
        lo_i, hi_i = new_lo, new_hi
    return ClipBounds(float(lo), float(hi))


def minmax_bounds(img: np.ndarray) -> tuple[float, float]:
    """(min, max) over finite pixels."""
    finite = finite_values(img)
    if finite.size == 0:
        raise AllNonFinite("min/max needs at least one finite pixel")
    return float(finite.min()), float(finite.max())


def clamp_to_bounds(img: np.ndarray, bounds: ClipBounds) -> np.ndarray:
    """Clamp finite values into the interval; NaN passes through unchanged.

    Bounds are rounded to float32 first so the clamped raster can represent
    them exactly; the published interval is that rounded one.
    """
    lo32 = np.float32(bounds.lo)
    hi32 = np.float32(bounds.hi)
    out = np.minimum(np.maximum(img, lo32), hi32)
    return out.astype(np.float32, copy=False)


def bounds_as_f32(bounds: ClipBounds) -> ClipBounds:
    return ClipBounds(float(np.float32(bounds.lo)), float(np.float32(bounds.hi)))
