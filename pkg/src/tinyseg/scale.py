"""HDR-to-display mapping: zscale/minmax limits and transfer curves.

The zscale variant here is the classic sampled-line-fit: sort a strided
sample, fit intensity against rank with iterative k-sigma rejection (each
rejection also takes its immediate neighbors), then spread the median by
slope/contrast. Arithmetic runs through `numerics` so limits are
reproducible bit for bit in the browser port.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewPixels
from .numerics import LN_1001, log_portable, median_sorted, tree_sum

MANUAL = "manual"
ZSCALE = "zscale"
MINMAX = "minmax"

LINEAR = "linear"
LOG = "log"
SQRT = "sqrt"
CURVES = (LINEAR, LOG, SQRT)

LOG_CURVE_A = 1000.0


@dataclass(frozen=True)
class ScaleLimits:
    """Display black point z1 and white point z2, in data units."""
    z1: float
    z2: float
    source: str = MANUAL

    def __post_init__(self):
        if not (np.isfinite(self.z1) and np.isfinite(self.z2) and self.z1 <= self.z2):
            raise ValueError(f"invalid scale limits ({self.z1}, {self.z2})")


@dataclass(frozen=True)
class ZScaleParams:
    n_samples: int = 1000
    contrast: float = 0.25
    krej: float = 2.5
    max_reject_fraction: float = 0.5
    max_iterations: int = 5
    min_pixels: int = 5

    def __post_init__(self):
        if not 0 < self.contrast <= 1:
            raise ValueError("contrast must be in (0, 1]")
        if not 0 < self.max_reject_fraction < 1:
            raise ValueError("max_reject_fraction must be in (0, 1)")
        if self.n_samples < self.min_pixels:
            raise ValueError("n_samples must be >= min_pixels")


def sample_grid(img: np.ndarray, n_samples: int) -> np.ndarray:
    """Up to n_samples pixels on a uniform stride over the flattened raster."""
    flat = np.asarray(img).ravel()
    stride = max(1, flat.size // n_samples)
    return flat[::stride][:n_samples]


def _fit_line_rejecting(s: np.ndarray, p: ZScaleParams) -> tuple[bool, float]:
    """Least-squares value-vs-rank fit with iterative rejection.

    Returns (fit_survived, slope per rank). Rejection threshold is
    krej * residual RMS; every newly rejected sample also rejects its
    immediate neighbors. The fit fails when survivors drop below
    max(min_pixels, max_reject_fraction * n).
    """
    n = s.size
    idx = np.arange(n, dtype=np.float64)
    alive = np.ones(n, dtype=bool)
    min_keep = max(float(p.min_pixels), p.max_reject_fraction * float(n))

    def lstsq() -> tuple[bool, float, float]:
        count = float(alive.sum())
        if count < 2:
            return False, 0.0, 0.0
        sx = tree_sum(idx[alive])
        sy = tree_sum(s[alive])
        sxx = tree_sum((idx * idx)[alive])
        sxy = tree_sum((idx * s)[alive])
        delta = count * sxx - sx * sx
        if delta == 0.0:
            return False, 0.0, 0.0
        slope = (count * sxy - sx * sy) / delta
        intercept = (sxx * sy - sx * sxy) / delta
        return True, slope, intercept

    for _ in range(p.max_iterations):
        ok, slope, intercept = lstsq()
        if not ok:
            return False, 0.0
        resid = s - (slope * idx + intercept)
        rms = float(np.sqrt(tree_sum(resid[alive] * resid[alive]) / float(alive.sum())))
        newbad = alive & (np.abs(resid) > p.krej * rms)
        if not newbad.any():
            return True, slope
        grown = newbad.copy()
        grown[:-1] |= newbad[1:]
        grown[1:] |= newbad[:-1]
        alive &= ~grown
        if float(alive.sum()) < min_keep:
            return False, 0.0
    ok, slope, _ = lstsq()
    return (True, slope) if ok else (False, 0.0)


def zscale_limits(img: np.ndarray, params: ZScaleParams | None = None) -> ScaleLimits:
    """Display limits via the sampled-line-fit contrast algorithm."""
    p = params or ZScaleParams()
    samples = sample_grid(img, p.n_samples)
    finite = samples[np.isfinite(samples)].astype(np.float64)
    if finite.size < p.min_pixels:
        raise TooFewPixels(
            f"zscale needs >= {p.min_pixels} finite samples, got {finite.size}"
        )
    s = np.sort(finite)
    n = s.size
    zmin = float(s[0])
    zmax = float(s[-1])
    med = median_sorted(s)
    mid = (float(n) - 1.0) / 2.0

    survived, slope = _fit_line_rejecting(s, p)
    if survived:
        z1 = max(zmin, med - (mid * slope) / p.contrast)
        z2 = min(zmax, med + ((float(n) - mid) * slope) / p.contrast)
        if z1 > z2:
            # rounding can leave a hair-negative slope on flat data
            z1 = z2 = med
    else:
        z1, z2 = zmin, zmax
    return ScaleLimits(z1, z2, ZSCALE)


def minmax_limits(img: np.ndarray) -> ScaleLimits:
    from .stats import minmax_bounds

    lo, hi = minmax_bounds(img)
    return ScaleLimits(lo, hi, MINMAX)


def normalized(img: np.ndarray, limits: ScaleLimits) -> np.ndarray:
    """Per-pixel t = clamp((v - z1) / (z2 - z1), 0, 1) as float64.

    Degenerate limits and non-finite pixels map to 0.
    """
    v = np.asarray(img).astype(np.float64)
    if limits.z2 == limits.z1:
        t = np.zeros_like(v)
    else:
        t = (v - limits.z1) / (limits.z2 - limits.z1)
        t = np.minimum(np.maximum(t, 0.0), 1.0)
    t[~np.isfinite(v)] = 0.0
    return t


def curve_value(t: np.ndarray, curve: str) -> np.ndarray:
    """Transfer curve d(t) on [0, 1] -> [0, 1], float64."""
    if curve == LINEAR:
        return t
    if curve == SQRT:
        return np.sqrt(t)
    if curve == LOG:
        return log_portable(1.0 + LOG_CURVE_A * t) / LN_1001
    raise ValueError(f"unknown transfer curve {curve!r}")


def quantize_u8(d: np.ndarray) -> np.ndarray:
    """round(255 * d) with halves away from zero; d must lie in [0, 1]."""
    return np.floor(255.0 * d + 0.5).astype(np.uint8)


def apply_curve(img: np.ndarray, limits: ScaleLimits, curve: str = LINEAR) -> np.ndarray:
    """Map a float raster to display bytes through the given curve."""
    return quantize_u8(curve_value(normalized(img, limits), curve))
