"""Image files as storage containers.

An image is split into its header region, the pixel array, and whatever
bytes follow the declared end of the image.  Two framed channels ride on
top of that layout:

* the LSB channel, one payload bit per pixel byte starting at the first
  pixel byte, written with the +/-1 parity rule;
* the trailer channel, a frame appended at the declared end of the image.

Both frames are ``magic(4) | version(1) | length(u32 BE) | payload |
crc32(u32 BE)``.  Supported inputs are uncompressed 8/24-bit BMP and binary
PGM (P5) / PPM (P6) with 8-bit samples.
"""

from __future__ import annotations

import os
import re
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ChannelOccupied,
    CompressedImage,
    CorruptFrame,
    InsufficientCapacity,
    IoError,
    MalformedHeader,
    UnsupportedFormat,
)

LSB_MAGIC = b"HDBS"
TRAILER_MAGIC = b"HDBR"
FRAME_VERSION = 1
FRAME_OVERHEAD = 13  # magic + version + length + crc

_HEADER = struct.Struct(">4sBI")
_NETPBM_HEADER = re.compile(
    rb"(P[56])((?:\s|#[^\r\n]*[\r\n])+)(\d+)((?:\s|#[^\r\n]*[\r\n])+)(\d+)"
    rb"((?:\s|#[^\r\n]*[\r\n])+)(\d+)\s")


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def frame(magic: bytes, payload: bytes) -> bytes:
    """Wrap *payload* in a channel frame."""
    return (_HEADER.pack(magic, FRAME_VERSION, len(payload)) + payload
            + struct.pack(">I", crc32(payload)))


@dataclass(frozen=True)
class ImageContainer:
    """A parsed image file.

    ``raw_bytes`` is the whole file.  ``pixel_offset``/``pixel_length``
    bound the pixel array (row padding included) and ``image_end`` is where
    the image ends according to its own headers; anything after it is the
    trailer.
    """

    raw_bytes: bytes
    pixel_offset: int
    pixel_length: int
    image_end: int
    format: str = "bmp"

    @property
    def trailer(self) -> Optional[bytes]:
        if len(self.raw_bytes) > self.image_end:
            return self.raw_bytes[self.image_end:]
        return None

    @property
    def pixels(self) -> bytes:
        return self.raw_bytes[self.pixel_offset:self.pixel_offset + self.pixel_length]

    @property
    def extension(self) -> str:
        return self.format

    def to_bytes(self) -> bytes:
        return self.raw_bytes

    def _replace_bytes(self, raw: bytes) -> "ImageContainer":
        return ImageContainer(raw, self.pixel_offset, self.pixel_length,
                              self.image_end, self.format)


def parse_image(data: bytes) -> ImageContainer:
    """Locate the pixel array and declared end of a BMP/PGM/PPM file."""
    data = bytes(data)
    if not data:
        raise UnsupportedFormat("empty file")
    if data[:2] == b"BM":
        return _parse_bmp(data)
    if data[:2] in (b"P5", b"P6"):
        return _parse_netpbm(data)
    raise UnsupportedFormat(f"unrecognised magic {data[:2]!r}")


def _parse_bmp(data: bytes) -> ImageContainer:
    if len(data) < 26:
        raise MalformedHeader("BMP shorter than its headers")
    file_size, pixel_offset, dib_size = struct.unpack_from("<I4xII", data, 2)
    if dib_size == 12:
        width, height, planes, bpp = struct.unpack_from("<HHHH", data, 18)
        compression = 0
    elif dib_size >= 40:
        if len(data) < 14 + 40:
            raise MalformedHeader("BMP info header truncated")
        width, height, planes, bpp, compression = struct.unpack_from(
            "<iiHHI", data, 18)
    else:
        raise MalformedHeader(f"unknown DIB header size {dib_size}")
    if compression != 0:
        raise CompressedImage(f"BMP compression {compression} is not supported")
    if bpp not in (8, 24):
        raise UnsupportedFormat(f"{bpp}-bit BMP is not supported")
    if width <= 0 or height == 0:
        raise MalformedHeader(f"bad BMP dimensions {width}x{height}")
    row = (width * bpp + 31) // 32 * 4
    pixel_length = row * abs(height)
    pixel_end = pixel_offset + pixel_length
    if pixel_offset < 14 + dib_size or pixel_end > len(data):
        raise MalformedHeader("BMP pixel array lies outside the file")
    image_end = file_size if file_size else pixel_end
    if image_end < pixel_end or image_end > len(data):
        raise MalformedHeader(
            f"BMP declares {file_size} bytes, pixels end at {pixel_end}, "
            f"file has {len(data)}")
    return ImageContainer(data, pixel_offset, pixel_length, image_end, "bmp")


def _parse_netpbm(data: bytes) -> ImageContainer:
    m = _NETPBM_HEADER.match(data)
    if m is None:
        raise MalformedHeader("unreadable PGM/PPM header")
    width, height, maxval = int(m.group(3)), int(m.group(5)), int(m.group(7))
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormat(f"maxval {maxval} is not supported (need 255)")
    channels = 3 if m.group(1) == b"P6" else 1
    pixel_offset = m.end()
    pixel_length = width * height * channels
    image_end = pixel_offset + pixel_length
    if image_end > len(data):
        raise MalformedHeader(
            f"raster needs {pixel_length} bytes, file has {len(data) - pixel_offset}")
    fmt = "ppm" if channels == 3 else "pgm"
    return ImageContainer(data, pixel_offset, pixel_length, image_end, fmt)


def load_image(path) -> ImageContainer:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(path, exc) from exc
    return parse_image(data)


# -- LSB channel --------------------------------------------------------------

def lsb_capacity(c: ImageContainer) -> int:
    return c.pixel_length // 8


def _lsb_bytes(c: ImageContainer, start: int, count: int) -> bytes:
    """Decode *count* bytes of the LSB stream beginning at stream byte *start*."""
    lo = c.pixel_offset + 8 * start
    pix = np.frombuffer(c.raw_bytes, dtype=np.uint8, count=8 * count, offset=lo)
    return np.packbits(pix & 1).tobytes()


def lsb_occupied(c: ImageContainer) -> bool:
    return lsb_capacity(c) >= 4 and _lsb_bytes(c, 0, 4) == LSB_MAGIC


def lsb_embed(c: ImageContainer, payload: bytes, *, overwrite: bool = False) -> ImageContainer:
    """Hide *payload* in the pixel LSBs using the +/-1 parity rule.

    A mismatching bit decrements the byte when the bit is 0 and increments
    it when the bit is 1, so the byte never leaves 0..255.
    """
    framed = frame(LSB_MAGIC, bytes(payload))
    needed = 8 * len(framed)
    if needed > c.pixel_length:
        raise InsufficientCapacity(needed, c.pixel_length)
    if not overwrite and lsb_occupied(c):
        raise ChannelOccupied("image already carries an LSB frame")
    bits = np.unpackbits(np.frombuffer(framed, dtype=np.uint8))
    buf = np.frombuffer(c.raw_bytes, dtype=np.uint8).copy()
    pix = buf[c.pixel_offset:c.pixel_offset + needed]
    wrong = (pix & 1) != bits
    pix[wrong & (bits == 0)] -= 1
    pix[wrong & (bits == 1)] += 1
    return c._replace_bytes(buf.tobytes())


def lsb_extract(c: ImageContainer) -> Optional[bytes]:
    if not lsb_occupied(c):
        return None
    capacity = lsb_capacity(c)
    if capacity < FRAME_OVERHEAD:
        raise CorruptFrame("LSB frame header runs past the pixel array")
    _, version, length = _HEADER.unpack(_lsb_bytes(c, 0, 9))
    if version != FRAME_VERSION:
        raise CorruptFrame(f"LSB frame version {version}")
    if FRAME_OVERHEAD + length > capacity:
        raise CorruptFrame(f"LSB frame length {length} exceeds capacity")
    body = _lsb_bytes(c, 9, length + 4)
    payload, (stored,) = body[:length], struct.unpack(">I", body[length:])
    if crc32(payload) != stored:
        raise CorruptFrame("LSB frame CRC mismatch")
    return payload


# -- trailer channel ----------------------------------------------------------

def write_trailer(c: ImageContainer, payload: bytes) -> ImageContainer:
    """Replace whatever follows the image with a single trailer frame."""
    return c._replace_bytes(c.raw_bytes[:c.image_end] + frame(TRAILER_MAGIC, bytes(payload)))


def read_trailer(c: ImageContainer) -> Optional[bytes]:
    tail = c.trailer
    if tail is None or tail[:4] != TRAILER_MAGIC:
        return None
    if len(tail) < FRAME_OVERHEAD:
        raise CorruptFrame("trailer frame truncated")
    _, version, length = _HEADER.unpack_from(tail)
    if version != FRAME_VERSION:
        raise CorruptFrame(f"trailer frame version {version}")
    if len(tail) != FRAME_OVERHEAD + length:
        raise CorruptFrame(
            f"trailer frame declares {length} payload bytes, "
            f"{len(tail) - FRAME_OVERHEAD} present")
    payload = tail[9:9 + length]
    (stored,) = struct.unpack_from(">I", tail, 9 + length)
    if crc32(payload) != stored:
        raise CorruptFrame("trailer frame CRC mismatch")
    return payload


# -- persistence --------------------------------------------------------------

def _write_tmp(tmp: str, data: bytes, sync: bool) -> None:
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        if sync:
            os.fsync(fh.fileno())


def _sync_dir(path: str) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def save_atomic(c: ImageContainer, path, *, sync: bool = True) -> None:
    """Write the container to *path* via ``<path>.tmp`` and a rename.

    With ``sync`` off the fsync calls are skipped; the rename still keeps
    readers from ever seeing a partial file.
    """
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        _write_tmp(tmp, c.raw_bytes, sync)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(path, exc) from exc
    if sync:
        _sync_dir(os.path.dirname(os.path.abspath(path)))


# -- cover generation ---------------------------------------------------------

def make_bmp(width: int, height: int, bpp: int = 24, pixels: Optional[bytes] = None) -> bytes:
    """Build an uncompressed bottom-up BMP.

    *pixels* supplies the raw pixel array including row padding; zeros are
    used when omitted.  8-bit images get a grayscale palette.
    """
    if bpp not in (8, 24):
        raise UnsupportedFormat(f"{bpp}-bit BMP is not supported")
    row = (width * bpp + 31) // 32 * 4
    size = row * height
    palette = b"".join(bytes((i, i, i, 0)) for i in range(256)) if bpp == 8 else b""
    offset = 14 + 40 + len(palette)
    if pixels is None:
        pixels = bytes(size)
    elif len(pixels) != size:
        raise ValueError(f"expected {size} pixel bytes, got {len(pixels)}")
    header = struct.pack("<2sIHHI", b"BM", offset + size, 0, 0, offset)
    info = struct.pack("<IiiHHIIiiII", 40, width, height, 1, bpp, 0, size,
                       2835, 2835, 256 if bpp == 8 else 0, 0)
    return header + info + palette + bytes(pixels)


def make_netpbm(width: int, height: int, channels: int = 3, pixels: Optional[bytes] = None) -> bytes:
    size = width * height * channels
    if pixels is None:
        pixels = bytes(size)
    elif len(pixels) != size:
        raise ValueError(f"expected {size} pixel bytes, got {len(pixels)}")
    magic = b"P6" if channels == 3 else b"P5"
    return magic + b"\n%d %d\n255\n" % (width, height) + bytes(pixels)


def random_cover(rng: np.random.Generator, width: int, height: int, kind: str = "bmp24") -> bytes:
    """A cover image of the given kind filled with uniform random pixels."""
    if kind in ("bmp24", "bmp8"):
        bpp = 24 if kind == "bmp24" else 8
        row = (width * bpp + 31) // 32 * 4
        return make_bmp(width, height, bpp, rng.integers(0, 256, row * height, dtype=np.uint8).tobytes())
    channels = {"ppm": 3, "pgm": 1}[kind]
    return make_netpbm(width, height, channels,
                       rng.integers(0, 256, width * height * channels, dtype=np.uint8).tobytes())
