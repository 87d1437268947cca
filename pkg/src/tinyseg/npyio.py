"""NPY v1.0/v2.0 interchange for 2-D float rasters.

Reader accepts '<f4' and '<f8' (f8 narrowed to f32), C order, 2-D only.
Writer emits v1.0 '<f4' with the standard 64-byte-aligned header.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import (
    BadMagic,
    FortranOrderUnsupported,
    ShapeNot2D,
    TruncatedPayload,
    UnsupportedDtype,
)

MAGIC = b"\x93NUMPY"


def load_npy(buf: bytes) -> np.ndarray:
    """Parse NPY bytes into a float32 2-D raster."""
    if len(buf) < 10 or not buf.startswith(MAGIC):
        raise BadMagic("not an NPY stream")
    major = buf[6]
    if major == 1:
        header_len = int.from_bytes(buf[8:10], "little")
        header_start = 10
    elif major == 2:
        if len(buf) < 12:
            raise TruncatedPayload("v2 header length missing")
        header_len = int.from_bytes(buf[8:12], "little")
        header_start = 12
    else:
        raise BadMagic(f"unsupported NPY version {major}.{buf[7]}")

    header_end = header_start + header_len
    if len(buf) < header_end:
        raise TruncatedPayload("declared header extends past end of input")
    try:
        header = ast.literal_eval(buf[header_start:header_end].decode("latin1"))
        descr = header["descr"]
        fortran = header["fortran_order"]
        shape = header["shape"]
    except Exception as exc:
        raise BadMagic(f"unparsable NPY header: {exc}") from exc

    if descr not in ("<f4", "<f8"):
        raise UnsupportedDtype(f"dtype {descr!r} not supported (want <f4 or <f8)")
    if fortran:
        raise FortranOrderUnsupported("fortran_order arrays are not supported")
    if not (isinstance(shape, tuple) and len(shape) == 2):
        raise ShapeNot2D(f"shape {shape} is not 2-D")

    height, width = (int(d) for d in shape)
    itemsize = 4 if descr == "<f4" else 8
    need = height * width * itemsize
    payload = buf[header_end:]
    if len(payload) < need:
        raise TruncatedPayload(f"payload needs {need} bytes, got {len(payload)}")
    arr = np.frombuffer(payload[:need], dtype=descr).reshape(height, width)
    return arr.astype(np.float32) if descr == "<f8" else arr.copy()


def serialize_npy(arr: np.ndarray) -> bytes:
    """v1.0 '<f4' NPY bytes for a 2-D array (np.load-compatible)."""
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.ndim != 2:
        raise ShapeNot2D(f"can only serialize 2-D arrays, got {arr.ndim}-D")
    header = ("{'descr': '<f4', 'fortran_order': False, "
              f"'shape': ({arr.shape[0]}, {arr.shape[1]}), }}")
    # total preamble (magic + version + length + header) padded to 64 bytes
    unpadded = len(MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    out = bytearray()
    out += MAGIC
    out += b"\x01\x00"
    out += len(header).to_bytes(2, "little")
    out += header.encode("latin1")
    out += arr.tobytes()
    return bytes(out)
