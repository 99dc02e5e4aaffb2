"""Layout and channel report for a single image file."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import image, schema
from .errors import HydbError, IntegrityError


@dataclass
class Inspection:
    format: str
    file_size: int
    pixel_offset: int
    pixel_length: int
    image_end: int
    trailer_length: int
    lsb_capacity: int
    lsb_channel: str
    trailer_channel: str
    corrupt: bool = False
    lsb_frame_bytes: int = 0
    delta_histogram: Optional[dict] = None
    changed_bytes: Optional[int] = None
    delta_map: Optional[np.ndarray] = field(default=None, repr=False)

    def lines(self) -> list:
        out = [
            f"format: {self.format}",
            f"file_size: {self.file_size}",
            f"header: 0..{self.pixel_offset}",
            f"pixel_offset: {self.pixel_offset}",
            f"pixel_length: {self.pixel_length}",
            f"image_end: {self.image_end}",
            f"trailer_length: {self.trailer_length}",
            f"lsb_capacity: {self.lsb_capacity}",
            f"lsb_channel: {self.lsb_channel}",
            f"trailer_channel: {self.trailer_channel}",
        ]
        if self.delta_histogram is not None:
            for delta in sorted(self.delta_histogram):
                out.append(f"delta[{delta:+d}]: {self.delta_histogram[delta]}")
            out.append(f"changed_bytes: {self.changed_bytes}")
        return out


def _describe_lsb(c) -> tuple:
    try:
        payload = image.lsb_extract(c)
    except IntegrityError as exc:
        return f"corrupt ({exc})", True
    if payload is None:
        return "empty", False
    size = f"{len(payload)} bytes"
    tag = schema.payload_tag(payload)
    try:
        if tag == "T":
            s = schema.decode_schema(payload)
            return f"table {s.table_name} ({size})", False
        if tag == "F":
            return f"link {schema.decode_fk(payload)} ({size})", False
    except HydbError as exc:
        return f"corrupt ({exc})", True
    return f"unrecognised payload ({size})", False


def _describe_trailer(c) -> tuple:
    if c.trailer is None:
        return "empty", False
    try:
        payload = image.read_trailer(c)
    except IntegrityError as exc:
        return f"corrupt ({exc})", True
    if payload is None:
        return f"foreign bytes ({len(c.trailer)})", False
    rows = payload.count(b"\n")
    return f"record block ({len(payload)} bytes, {rows} rows)", False


def inspect_image(data: bytes, cover: Optional[bytes] = None) -> Inspection:
    """Describe *data*; with *cover*, also histogram the pixel byte deltas."""
    c = image.parse_image(data)
    lsb, bad_lsb = _describe_lsb(c)
    trailer, bad_trailer = _describe_trailer(c)
    result = Inspection(
        format=c.format,
        file_size=len(c.raw_bytes),
        pixel_offset=c.pixel_offset,
        pixel_length=c.pixel_length,
        image_end=c.image_end,
        trailer_length=len(c.trailer or b""),
        lsb_capacity=image.lsb_capacity(c),
        lsb_channel=lsb,
        trailer_channel=trailer,
        corrupt=bad_lsb or bad_trailer,
    )
    if not bad_lsb and lsb != "empty":
        result.lsb_frame_bytes = 8 * (image.FRAME_OVERHEAD + len(image.lsb_extract(c)))
    if cover is not None:
        orig = image.parse_image(cover)
        if (orig.pixel_offset, orig.pixel_length) != (c.pixel_offset, c.pixel_length):
            raise HydbError("cover image has a different pixel layout")
        a = np.frombuffer(c.pixels, dtype=np.uint8).astype(np.int16)
        b = np.frombuffer(orig.pixels, dtype=np.uint8).astype(np.int16)
        delta = a - b
        values, counts = np.unique(delta, return_counts=True)
        hist = Counter({-1: 0, 0: 0, 1: 0})
        hist.update(dict(zip(values.tolist(), counts.tolist())))
        result.delta_histogram = dict(hist)
        result.changed_bytes = int(np.count_nonzero(delta))
        result.delta_map = delta
    return result
