"""Run-length coding of the edit overlay for the mask upload body.

Runs are (start, length, state) triples over the flattened row-major
overlay; only non-NEUTRAL runs are emitted, so an untouched overlay costs
nothing on the wire.
"""

from __future__ import annotations

import numpy as np

from .errors import MalformedRle
from .raster import FORCE_OFF, NEUTRAL

Run = tuple[int, int, int]


def encode_overlay_rle(overlay: np.ndarray) -> list[Run]:
    flat = np.asarray(overlay, dtype=np.uint8).ravel()
    runs: list[Run] = []
    if flat.size == 0:
        return runs
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [flat.size]))
    for start, end in zip(starts, ends):
        state = int(flat[start])
        if state != NEUTRAL:
            runs.append((int(start), int(end - start), state))
    return runs


def decode_overlay_rle(runs, width: int, height: int) -> np.ndarray:
    """Rebuild an overlay raster; rejects malformed runs."""
    total = width * height
    flat = np.zeros(total, dtype=np.uint8)
    for run in runs:
        try:
            start, length, state = run
        except (TypeError, ValueError) as exc:
            raise MalformedRle(f"run {run!r} is not a (start, len, state) triple") from exc
        if not all(isinstance(v, int) and not isinstance(v, bool)
                   for v in (start, length, state)):
            raise MalformedRle(f"run {run!r} has non-integer fields")
        if length < 1 or start < 0 or start + length > total:
            raise MalformedRle(
                f"run ({start}, {length}) outside raster of {total} pixels"
            )
        if not NEUTRAL <= state <= FORCE_OFF:
            raise MalformedRle(f"unknown overlay state {state}")
        flat[start:start + length] = state
    return flat.reshape(height, width)
