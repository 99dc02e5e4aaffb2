"""Typed cell values and the delimited record block.

Cells are plain Python values: ``str`` for CHAR/TEXT, ``int`` for INT,
``float`` for FLOAT, ``bool`` for BOOLEAN, :class:`Money` for MONEY and
``None`` for NULL.  A row is a tuple of cells in column order.

The record block is UTF-8 text with one row per LF-terminated line and
fields separated by 0x1F.  Inside a field backslash, LF and 0x1F are
escaped as ``\\\\``, ``\\n`` and ``\\f``; a field consisting of exactly
``\\N`` is NULL.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Sequence

from .errors import (
    ArityMismatch,
    CharTooLong,
    IntOutOfRange,
    MalformedRecordBlock,
    MoneyPrecisionExceeded,
    NullNotAllowed,
    TypeMismatch,
    TypeParseError,
)
from .schema import DataType, TableSchema

INT_MIN, INT_MAX = -(2 ** 63), 2 ** 63 - 1
MONEY_SCALE = 10_000

_INT = re.compile(r"[+-]?[0-9]+\Z")
_FLOAT = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?\Z")
_MONEY = re.compile(r"([+-]?)([0-9]+)(?:\.([0-9]*))?\Z")

US = "\x1f"
NULL_FIELD = "\\N"


@dataclass(frozen=True, order=True)
class Money:
    """Fixed-point amount stored as a count of 1/10000 units."""

    units: int

    def __post_init__(self):
        if isinstance(self.units, bool) or not isinstance(self.units, int):
            raise TypeError("Money units must be an int")
        if not INT_MIN < self.units < 2 ** 63:
            raise IntOutOfRange(str(self.units))

    @classmethod
    def parse(cls, text: str) -> "Money":
        m = _MONEY.match(text)
        if m is None:
            raise TypeParseError(text, "MONEY")
        sign, whole, frac = m.group(1), m.group(2), m.group(3) or ""
        if len(frac) > 4:
            raise MoneyPrecisionExceeded(text)
        units = int(whole) * MONEY_SCALE + int(frac.ljust(4, "0"))
        if units >= 2 ** 63:
            raise IntOutOfRange(text)
        return cls(-units if sign == "-" else units)

    def to_decimal(self) -> Decimal:
        return Decimal(self.units).scaleb(-4)

    def __str__(self):
        whole, frac = divmod(abs(self.units), MONEY_SCALE)
        return f"{'-' if self.units < 0 else ''}{whole}.{frac:04d}"

    def __add__(self, other):
        if not isinstance(other, Money):
            return NotImplemented
        return Money(self.units + other.units)


def parse_value(text: str, t: DataType):
    """Parse the text form of a value of type *t*.  Never returns NULL."""
    kind = t.kind
    if kind == "INT":
        if not _INT.match(text):
            raise TypeParseError(text, "INT")
        value = int(text)
        if not INT_MIN <= value <= INT_MAX:
            raise IntOutOfRange(text)
        return value
    if kind == "FLOAT":
        if not _FLOAT.match(text):
            raise TypeParseError(text, "FLOAT")
        value = float(text)
        if not math.isfinite(value):
            raise TypeParseError(text, "FLOAT")
        return value
    if kind == "MONEY":
        return Money.parse(text)
    if kind == "BOOLEAN":
        low = text.lower()
        if low not in ("true", "false"):
            raise TypeParseError(text, "BOOLEAN")
        return low == "true"
    if kind == "CHAR" and len(text) > t.length:
        raise CharTooLong(text, t.length)
    return text


def render_value(v) -> str:
    """Canonical text of a non-NULL value."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def check_value(column, v) -> None:
    """Raise unless *v* may be stored in *column*."""
    if v is None:
        if not column.nullable:
            raise NullNotAllowed(column.name)
        return
    kind = column.dtype.kind
    if kind in ("CHAR", "TEXT"):
        ok = isinstance(v, str)
        if ok and kind == "CHAR" and len(v) > column.dtype.length:
            raise CharTooLong(v, column.dtype.length)
    elif kind == "INT":
        ok = isinstance(v, int) and not isinstance(v, bool) and INT_MIN <= v <= INT_MAX
    elif kind == "FLOAT":
        ok = isinstance(v, float) and math.isfinite(v)
    elif kind == "MONEY":
        ok = isinstance(v, Money)
    else:
        ok = isinstance(v, bool)
    if not ok:
        raise TypeMismatch(column.name, f": got {type(v).__name__} {v!r}, want {column.dtype}")


def typecheck_row(s: TableSchema, r: Sequence) -> None:
    if len(r) != len(s.columns):
        raise ArityMismatch(len(s.columns), len(r))
    for column, v in zip(s.columns, r):
        check_value(column, v)


# -- record block -------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\n": "\\n", US: "\\f"}
_ESCAPE_RE = re.compile(r"[\\\n\x1f]")
_UNESCAPES = {"\\": "\\", "n": "\n", "f": US}


def _escape(text: str) -> str:
    return _ESCAPE_RE.sub(lambda m: _ESCAPES[m.group()], text)


def _unescape(field: str, line: int) -> str:
    if "\\" not in field:
        return field
    out, i = [], 0
    while i < len(field):
        ch = field[i]
        if ch == "\\":
            nxt = field[i + 1:i + 2]
            if nxt not in _UNESCAPES:
                raise MalformedRecordBlock(line, f"bad escape in field {field!r}")
            out.append(_UNESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def encode_records(s: TableSchema, rows: Iterable[Sequence]) -> bytes:
    lines = []
    for row in rows:
        fields = (NULL_FIELD if v is None else _escape(render_value(v)) for v in row)
        lines.append(US.join(fields) + "\n")
    return "".join(lines).encode("utf-8")


def decode_records(s: TableSchema, b: bytes) -> list:
    try:
        text = bytes(b).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedRecordBlock(0, f"not UTF-8: {exc}") from None
    if not text:
        return []
    if not text.endswith("\n"):
        raise MalformedRecordBlock(text.count("\n") + 1, "missing final line feed")
    rows = []
    width = len(s.columns)
    for n, line in enumerate(text[:-1].split("\n"), start=1):
        fields = line.split(US)
        if len(fields) != width:
            raise MalformedRecordBlock(n, f"{len(fields)} fields, expected {width}")
        row = []
        for column, field in zip(s.columns, fields):
            if field == NULL_FIELD:
                if not column.nullable:
                    raise MalformedRecordBlock(n, f"NULL in NOT NULL column {column.name!r}")
                row.append(None)
                continue
            raw = _unescape(field, n)
            try:
                row.append(parse_value(raw, column.dtype))
            except TypeParseError as exc:
                raise TypeParseError(exc.text, exc.expected, line=n) from None
            except (CharTooLong, MoneyPrecisionExceeded, IntOutOfRange) as exc:
                raise MalformedRecordBlock(n, str(exc)) from None
        rows.append(tuple(row))
    return rows
