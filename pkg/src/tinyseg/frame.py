"""FrameV1: the binary stream carrying raw image + probability map.

Layout (little-endian):

    offset  size  field
    0       4     magic "TSEG"
    4       1     version = 1
    5       1     flags (bit0: payload deflate-compressed)
    6       1     dtype (0 = float32 LE)
    7       1     reserved = 0
    8       4     width  (u32)
    12      4     height (u32)
    16      ...   payload: image raster then probability raster, row-major,
                  width*height*4 bytes each, compressed as a whole if bit0

Compression is applied only when it shrinks the payload by at least 5%.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import FrameError

MAGIC = b"TSEG"
VERSION = 1
FLAG_DEFLATE = 0x01
DTYPE_F32LE = 0

HEADER = struct.Struct("<4sBBBBII")
HEADER_SIZE = HEADER.size  # 16

MIN_COMPRESSION_GAIN = 0.05
_ZLIB_LEVEL = 1


def _deflate(payload: bytes) -> bytes:
    # Z_RLE reaches within a percent of level-1 on float rasters at a
    # fraction of the cost; the output is still a standard zlib stream
    packer = zlib.compressobj(_ZLIB_LEVEL, zlib.DEFLATED, zlib.MAX_WBITS,
                              zlib.DEF_MEM_LEVEL, zlib.Z_RLE)
    return packer.compress(payload) + packer.flush()


def encode_frame(image: np.ndarray, prob: np.ndarray, *, try_compress: bool = True) -> bytes:
    """Encode an image/probability pair; both float32, same shape."""
    if image.shape != prob.shape:
        raise FrameError(f"image {image.shape} vs probability {prob.shape}")
    height, width = image.shape
    payload = (np.ascontiguousarray(image, dtype="<f4").tobytes()
               + np.ascontiguousarray(prob, dtype="<f4").tobytes())
    flags = 0
    if try_compress:
        packed = _deflate(payload)
        if len(packed) <= len(payload) * (1.0 - MIN_COMPRESSION_GAIN):
            payload = packed
            flags |= FLAG_DEFLATE
    header = HEADER.pack(MAGIC, VERSION, flags, DTYPE_F32LE, 0, width, height)
    return header + payload


def decode_frame(buf: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Decode FrameV1 bytes into (image, probability) float32 rasters."""
    if len(buf) < HEADER_SIZE:
        raise FrameError("frame shorter than header")
    magic, version, flags, dtype, reserved, width, height = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FrameError("bad frame magic")
    if version != VERSION:
        raise FrameError(f"unsupported frame version {version}")
    if dtype != DTYPE_F32LE:
        raise FrameError(f"unsupported frame dtype {dtype}")
    if reserved != 0:
        raise FrameError("nonzero reserved byte")
    payload = buf[HEADER_SIZE:]
    if flags & FLAG_DEFLATE:
        inflater = zlib.decompressobj()
        try:
            payload = inflater.decompress(payload)
        except zlib.error as exc:
            raise FrameError(f"payload does not inflate: {exc}") from exc
        if not inflater.eof or inflater.unused_data:
            raise FrameError("compressed payload has trailing or missing bytes")
    expected = 2 * width * height * 4
    if len(payload) != expected:
        raise FrameError(f"payload is {len(payload)} bytes, want {expected}")
    half = width * height * 4
    image = np.frombuffer(payload[:half], dtype="<f4").reshape(height, width)
    prob = np.frombuffer(payload[half:], dtype="<f4").reshape(height, width)
    return image.copy(), prob.copy()
