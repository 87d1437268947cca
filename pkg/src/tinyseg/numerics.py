"""Deterministic float64 primitives shared with the browser-side pipeline.

The display pipeline must yield byte-identical output when re-implemented
client-side, so every reduction and transcendental used on the image path
has a pinned evaluation order here. numpy's own reductions (blocked pairwise
sums) and the platform libm are deliberately avoided where their rounding is
unspecified.
"""

from __future__ import annotations

import struct

import numpy as np


def tree_sum(values: np.ndarray) -> float:
    """Sum float64 values by pairwise halving over a power-of-two padding.

    The reduction tree is fully determined by the element order, so any
    port that pairs elements the same way reproduces the result bit for bit.
    """
    a = np.ascontiguousarray(values, dtype=np.float64).ravel()
    n = a.size
    if n == 0:
        return 0.0
    size = 1
    while size < n:
        size *= 2
    if size != n:
        padded = np.zeros(size, dtype=np.float64)
        padded[:n] = a
        a = padded
    while a.size > 1:
        a = a[0::2] + a[1::2]
    return float(a[0])


def tree_mean(values: np.ndarray) -> float:
    return tree_sum(values) / float(len(values))


def median_sorted(s: np.ndarray) -> float:
    """Median of an ascending array: middle element, or the mean of the two
    central elements for even length."""
    n = len(s)
    if n == 0:
        raise ValueError("median of empty array")
    mid = n // 2
    if n % 2:
        return float(s[mid])
    return (float(s[mid - 1]) + float(s[mid])) / 2.0


def _f64(bits: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", bits))[0]


# fdlibm e_log coefficients, constructed from their bit patterns so no
# decimal transcription can drift.
_LN2_HI = _f64(0x3FE62E42FEE00000)
_LN2_LO = _f64(0x3DEA39EF35793C76)
_LG1 = _f64(0x3FE5555555555593)
_LG2 = _f64(0x3FD999999997FA04)
_LG3 = _f64(0x3FD2492494229359)
_LG4 = _f64(0x3FCC71C51D8E78AF)
_LG5 = _f64(0x3FC7466496CB03DE)
_LG6 = _f64(0x3FC39A09D078C69F)
_LG7 = _f64(0x3FC2F112DF3E5244)


def log_portable(x: np.ndarray | float) -> np.ndarray:
    """Elementwise natural log via the fdlibm algorithm, bit-stable across
    ports that replicate the same operation sequence.

    Only finite positive normal inputs are supported; the display curve
    evaluates it on [1, 1001].
    """
    xa = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    out_shape = xa.shape
    xa = np.atleast_1d(xa).ravel()
    if xa.size and (np.any(~np.isfinite(xa)) or np.any(xa < 2.2250738585072014e-308)):
        raise ValueError("log_portable requires finite positive normal inputs")

    bits = xa.view(np.uint64)
    hx = (bits >> np.uint64(32)).astype(np.int64)
    lx = bits & np.uint64(0xFFFFFFFF)

    k = (hx >> 20) - 1023
    hxf = hx & 0x000FFFFF
    i = (hxf + 0x95F64) & 0x100000
    rebuilt = (((hxf | (i ^ 0x3FF00000)).astype(np.uint64)) << np.uint64(32)) | lx
    xn = rebuilt.view(np.float64)
    k = k + (i >> 20)

    f = xn - 1.0
    dk = k.astype(np.float64)
    k0 = k == 0

    s = f / (2.0 + f)
    z = s * s
    w = z * z
    t1 = w * (_LG2 + w * (_LG4 + w * _LG6))
    t2 = z * (_LG1 + w * (_LG3 + w * (_LG5 + w * _LG7)))
    r = t2 + t1
    hfsq = 0.5 * f * f
    ij_pos = ((hxf - 0x6147A) | (0x6B851 - hxf)) > 0
    big = np.where(
        k0,
        f - (hfsq - s * (hfsq + r)),
        dk * _LN2_HI - ((hfsq - (s * (hfsq + r) + dk * _LN2_LO)) - f),
    )
    small = np.where(
        k0,
        f - s * (f - r),
        dk * _LN2_HI - ((s * (f - r) - dk * _LN2_LO) - f),
    )
    out = np.where(ij_pos, big, small)

    # |f| < 2**-20 shortcut, same as the reference implementation
    tiny = ((hxf + 2) & 0x000FFFFF) < 3
    if np.any(tiny):
        rt = f * f * (0.5 - 0.33333333333333333 * f)
        easy = np.where(k0, f - rt, dk * _LN2_HI - ((rt - dk * _LN2_LO) - f))
        exact = np.where(k0, 0.0, dk * _LN2_HI + dk * _LN2_LO)
        out = np.where(tiny, np.where(f == 0.0, exact, easy), out)

    return out.reshape(out_shape)


LN_1001 = float(log_portable(np.array([1001.0]))[0])
