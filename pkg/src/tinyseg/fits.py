"""Byte-preserving FITS subset: primary 2-D image plus opaque extensions.

Parsing keeps the raw bytes of every HDU so an unmodified document
re-serializes to exactly the input. Decoding covers BITPIX 8/16/32/-32/-64
with BSCALE/BZERO; everything else (tables, compressed tiles, WCS) passes
through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingEnd,
    MissingMagic,
    NaxisNot2,
    TruncatedData,
    UnsupportedBitpix,
)

BLOCK = 2880
CARD = 80

_BITPIX_DTYPES = {
    8: ">u1",
    16: ">i2",
    32: ">i4",
    -32: ">f4",
    -64: ">f8",
}

DEFAULT_MASK_EXTNAME = "SEG_MASK"


@dataclass
class FitsHDU:
    """One header-data unit, kept as raw bytes for exact round-tripping."""
    header_bytes: bytes
    data_bytes: bytes
    cards: list[str] = field(default_factory=list)

    def keyword(self, name: str, default=None):
        """Value of the first card with this keyword, parsed."""
        for card in self.cards:
            if card[:8].rstrip() == name and card[8:10] == "= ":
                return _parse_value(card)
        return default


@dataclass
class FitsDocument:
    hdus: list[FitsHDU]
    primary_image: np.ndarray | None
    bitpix: int
    bscale: float = 1.0
    bzero: float = 0.0

    def tobytes(self) -> bytes:
        return b"".join(h.header_bytes + h.data_bytes for h in self.hdus)


def _parse_value(card: str):
    """Parse the value field of a fixed- or free-format value card."""
    body = card[10:]
    if body.lstrip().startswith("'"):
        # quoted string; '' escapes a quote
        text = body.lstrip()[1:]
        out = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch == "'":
                if i + 1 < len(text) and text[i + 1] == "'":
                    out.append("'")
                    i += 2
                    continue
                break
            out.append(ch)
            i += 1
        return "".join(out).rstrip()
    value = body.split("/", 1)[0].strip()
    if value == "T":
        return True
    if value == "F":
        return False
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value.replace("D", "E").replace("d", "e"))
    except ValueError:
        return value


def _read_header(buf: bytes, offset: int) -> tuple[list[str], int]:
    """Consume whole 2880-byte blocks until an END card; return cards and
    the offset just past the last header block."""
    cards: list[str] = []
    pos = offset
    while True:
        block = buf[pos:pos + BLOCK]
        if len(block) < BLOCK:
            raise MissingEnd(f"header at offset {offset} has no END card")
        pos += BLOCK
        found_end = False
        for i in range(0, BLOCK, CARD):
            card = block[i:i + CARD].decode("ascii", errors="replace")
            cards.append(card)
            if card[:8].rstrip() == "END":
                found_end = True
                break
        if found_end:
            return cards, pos


def _header_keyword(cards: list[str], name: str, default=None):
    for card in cards:
        if card[:8].rstrip() == name and card[8:10] == "= ":
            return _parse_value(card)
    return default


def _data_size(cards: list[str], primary: bool) -> int:
    bitpix = int(_header_keyword(cards, "BITPIX", 0))
    naxis = int(_header_keyword(cards, "NAXIS", 0))
    shape = [int(_header_keyword(cards, f"NAXIS{i}", 0)) for i in range(1, naxis + 1)]
    npix = 1
    for dim in shape:
        npix *= dim
    if naxis == 0:
        npix = 0
    if primary:
        return abs(bitpix) // 8 * npix
    pcount = int(_header_keyword(cards, "PCOUNT", 0))
    gcount = int(_header_keyword(cards, "GCOUNT", 1))
    return abs(bitpix) // 8 * gcount * (pcount + npix)


def _take_data(buf: bytes, offset: int, size: int) -> tuple[bytes, int]:
    padded = (size + BLOCK - 1) // BLOCK * BLOCK
    chunk = buf[offset:offset + padded]
    if len(chunk) < size:
        raise TruncatedData(
            f"data block needs {size} bytes, {len(chunk)} available"
        )
    return chunk, offset + len(chunk)


def load_fits(buf: bytes) -> FitsDocument:
    """Parse a FITS byte stream; decode the primary HDU to a float32 image.

    Physical values are BZERO + BSCALE * stored. Extension HDUs are retained
    as opaque blocks so serialization is byte-exact.
    """
    if not buf.startswith(b"SIMPLE  ="):
        raise MissingMagic("input does not start with a SIMPLE card")

    cards, data_off = _read_header(buf, 0)
    hdr = buf[0:data_off]
    bitpix = _header_keyword(cards, "BITPIX")
    if bitpix not in _BITPIX_DTYPES:
        raise UnsupportedBitpix(f"BITPIX={bitpix}")
    naxis = int(_header_keyword(cards, "NAXIS", 0))
    if naxis not in (0, 2):
        raise NaxisNot2(f"primary HDU has NAXIS={naxis}")

    size = _data_size(cards, primary=True)
    data, pos = _take_data(buf, data_off, size)
    hdus = [FitsHDU(hdr, data, cards)]

    image = None
    if naxis == 2:
        width = int(_header_keyword(cards, "NAXIS1"))
        height = int(_header_keyword(cards, "NAXIS2"))
        bscale = float(_header_keyword(cards, "BSCALE", 1.0))
        bzero = float(_header_keyword(cards, "BZERO", 0.0))
        stored = np.frombuffer(data, dtype=_BITPIX_DTYPES[bitpix],
                               count=width * height).reshape(height, width)
        if bscale == 1.0 and bzero == 0.0:
            image = stored.astype(np.float32)
        else:
            image = (bzero + bscale * stored.astype(np.float64)).astype(np.float32)
    else:
        bscale, bzero = 1.0, 0.0

    while pos < len(buf):
        ext_cards, ext_data_off = _read_header(buf, pos)
        ext_hdr = buf[pos:ext_data_off]
        ext_size = _data_size(ext_cards, primary=False)
        ext_data, pos = _take_data(buf, ext_data_off, ext_size)
        hdus.append(FitsHDU(ext_hdr, ext_data, ext_cards))

    return FitsDocument(hdus=hdus, primary_image=image, bitpix=bitpix,
                        bscale=bscale, bzero=bzero)


def decode_image_hdu(hdu: FitsHDU) -> np.ndarray:
    """Decode any 2-D IMAGE HDU to float32 (used for mask/probability
    extensions)."""
    bitpix = hdu.keyword("BITPIX")
    if bitpix not in _BITPIX_DTYPES:
        raise UnsupportedBitpix(f"BITPIX={bitpix}")
    if int(hdu.keyword("NAXIS", 0)) != 2:
        raise NaxisNot2("extension is not a 2-D image")
    width = int(hdu.keyword("NAXIS1"))
    height = int(hdu.keyword("NAXIS2"))
    need = abs(bitpix) // 8 * width * height
    if len(hdu.data_bytes) < need:
        raise TruncatedData("extension data block too short")
    stored = np.frombuffer(hdu.data_bytes, dtype=_BITPIX_DTYPES[bitpix],
                           count=width * height).reshape(height, width)
    bscale = float(hdu.keyword("BSCALE", 1.0))
    bzero = float(hdu.keyword("BZERO", 0.0))
    if bscale == 1.0 and bzero == 0.0:
        return stored.astype(np.float32)
    return (bzero + bscale * stored.astype(np.float64)).astype(np.float32)


def find_extension(doc: FitsDocument, ext_name: str) -> FitsHDU | None:
    for hdu in doc.hdus[1:]:
        if hdu.keyword("EXTNAME") == ext_name:
            return hdu
    return None


def _card(keyword: str, value=None, comment: str | None = None) -> bytes:
    if value is None:
        text = f"{keyword:<80}"
    else:
        if isinstance(value, bool):
            body = f"{'T' if value else 'F':>20}"
        elif isinstance(value, int):
            body = f"{value:>20}"
        elif isinstance(value, float):
            body = f"{value!r:>20}"
        else:
            body = f"'{value:<8}'"
        text = f"{keyword:<8}= {body}"
        if comment:
            text += f" / {comment}"
        text = f"{text:<80}"
    if len(text) != 80:
        raise ValueError(f"card overflow for {keyword}")
    return text.encode("ascii")


def _pad_block(raw: bytes, fill: bytes = b" ") -> bytes:
    rem = len(raw) % BLOCK
    if rem:
        raw += fill * (BLOCK - rem)
    return raw


def mask_extension_bytes(mask: np.ndarray, ext_name: str) -> bytes:
    """An IMAGE extension HDU (BITPIX=8) holding a 0/1 mask."""
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    height, width = mask.shape
    header = b"".join([
        _card("XTENSION", "IMAGE", "binary segmentation mask"),
        _card("BITPIX", 8),
        _card("NAXIS", 2),
        _card("NAXIS1", width),
        _card("NAXIS2", height),
        _card("PCOUNT", 0),
        _card("GCOUNT", 1),
        _card("EXTNAME", ext_name),
        _card("END"),
    ])
    return _pad_block(header) + _pad_block(mask.tobytes(), b"\x00")


def write_fits_with_mask(doc: FitsDocument, mask: np.ndarray,
                         ext_name: str = DEFAULT_MASK_EXTNAME) -> bytes:
    """Original bytes plus one appended mask extension."""
    mask = np.asarray(mask)
    if doc.primary_image is None or mask.shape != doc.primary_image.shape:
        want = None if doc.primary_image is None else doc.primary_image.shape
        raise DimensionMismatch(f"mask {mask.shape} vs image {want}")
    return doc.tobytes() + mask_extension_bytes(mask, ext_name)


def wrap_image(img: np.ndarray) -> FitsDocument:
    """Minimal single-HDU FITS document around a float32 image (used to give
    NPY uploads a mask-appendable container)."""
    img = np.ascontiguousarray(img, dtype=np.float32)
    height, width = img.shape
    header = b"".join([
        _card("SIMPLE", True, "conforms to FITS standard"),
        _card("BITPIX", -32),
        _card("NAXIS", 2),
        _card("NAXIS1", width),
        _card("NAXIS2", height),
        _card("END"),
    ])
    header = _pad_block(header)
    data = _pad_block(img.astype(">f4").tobytes(), b"\x00")
    cards, _ = _read_header(header, 0)
    return FitsDocument(
        hdus=[FitsHDU(header, data, cards)],
        primary_image=img,
        bitpix=-32,
    )
