"""The shared upload -> detect -> compose -> masked-FITS path.

The batch CLI and the HTTP download endpoint both go through these
functions, so a file processed either way yields byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fits as fitsio
from . import maskops, npyio
from .detect import DetectorSpec, detect
from .errors import FitsError, NpyError, UnparsableFile
from .raster import ObjectRegion, new_overlay


def parse_upload(raw: bytes) -> fitsio.FitsDocument:
    """Make a FITS document out of an uploaded FITS or NPY byte stream.

    NPY images are wrapped in a minimal single-HDU container so a mask
    extension can be appended later.
    """
    if raw.startswith(b"SIMPLE  ="):
        try:
            doc = fitsio.load_fits(raw)
        except FitsError as exc:
            raise UnparsableFile(f"FITS: {exc}") from exc
        if doc.primary_image is None:
            raise UnparsableFile("FITS primary HDU carries no 2-D image")
        return doc
    if raw.startswith(npyio.MAGIC):
        try:
            return fitsio.wrap_image(npyio.load_npy(raw))
        except NpyError as exc:
            raise UnparsableFile(f"NPY: {exc}") from exc
    raise UnparsableFile("input is neither FITS nor NPY")


def compose_final_mask(prob: np.ndarray, threshold: float, dilation: int,
                       overlay: np.ndarray | None = None) -> np.ndarray:
    """apply_overlay(dilate(threshold(prob, t), k), overlay)."""
    mask = maskops.dilate(maskops.threshold(prob, threshold), dilation)
    if overlay is None:
        overlay = new_overlay(*mask.shape)
    return maskops.apply_overlay(mask, overlay)


def default_objects(prob: np.ndarray) -> list[ObjectRegion]:
    """Object list from the detector's default 0.5-threshold mask."""
    return maskops.connected_components(maskops.threshold(prob, 0.5))


@dataclass
class ProcessResult:
    fits_bytes: bytes
    mask: np.ndarray
    objects: list[ObjectRegion]


def process_bytes(raw: bytes, detector: DetectorSpec, *, threshold: float = 0.5,
                  dilation: int = 0, overlay: np.ndarray | None = None,
                  ext_name: str = fitsio.DEFAULT_MASK_EXTNAME) -> ProcessResult:
    """Full single-file path: parse, detect, compose, append mask."""
    doc = parse_upload(raw)
    prob = detect(detector, doc.primary_image, source_doc=doc)
    mask = compose_final_mask(prob, threshold, dilation, overlay)
    return ProcessResult(
        fits_bytes=fitsio.write_fits_with_mask(doc, mask, ext_name),
        mask=mask,
        objects=maskops.connected_components(mask),
    )
