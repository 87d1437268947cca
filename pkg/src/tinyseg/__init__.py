"""tinyseg: interactive segmentation toolkit for tiny objects in large HDR
scientific images.

Library surface (the workbench, service and CLI are all built on these):

- `fits` / `npyio`: byte-preserving FITS subset and NPY interchange
- `stats` / `scale`: sigma clipping, zscale/minmax limits, transfer curves
- `maskops`: threshold, dilation, edit overlay, connected components
- `pipeline`: buffered stage chain with minimal re-execution, pixel probe
- `detect`: baseline / precomputed / remote detectors
- `frame` / `rle`: wire formats
- `service` / `cli`: HTTP app factory and batch interface
"""

from .detect import (
    BaselineDetector,
    PrecomputedDetector,
    RemoteDetector,
    detect,
    parse_detector_spec,
)
from .fits import FitsDocument, load_fits, write_fits_with_mask
from .maskops import apply_overlay, connected_components, dilate, pencil_edit, threshold
from .npyio import load_npy, serialize_npy
from .pipeline import Pipeline, ProbeResult
from .raster import FORCE_OFF, FORCE_ON, NEUTRAL, ClipBounds, ObjectRegion
from .scale import ScaleLimits, ZScaleParams, apply_curve, minmax_limits, zscale_limits
from .stats import sigma_clip_bounds

__version__ = "0.1.0"

__all__ = [
    "BaselineDetector", "PrecomputedDetector", "RemoteDetector", "detect",
    "parse_detector_spec", "FitsDocument", "load_fits", "write_fits_with_mask",
    "apply_overlay", "connected_components", "dilate", "pencil_edit",
    "threshold", "load_npy", "serialize_npy", "Pipeline", "ProbeResult",
    "FORCE_OFF", "FORCE_ON", "NEUTRAL", "ClipBounds", "ObjectRegion",
    "ScaleLimits", "ZScaleParams", "apply_curve", "minmax_limits",
    "zscale_limits", "sigma_clip_bounds", "__version__",
]
