"""Independent reference implementations used to check the package.

Nothing here imports from ``hydb`` except error class names in the
reference store, which exist only so outcomes can be compared by name.
"""

import struct
from decimal import Decimal


def crc32_bitwise(data: bytes) -> int:
    """Reflected CRC-32, polynomial 0xEDB88320, one bit at a time."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0xEDB88320 if crc & 1 else crc >> 1
    return crc ^ 0xFFFFFFFF


def bits_msb_first(data: bytes) -> list:
    return [(byte >> (7 - i)) & 1 for byte in data for i in range(8)]


def parity_embed(pixels, bits) -> list:
    """Literal transcription of the +/-1 parity loop."""
    out = list(pixels)
    k = 0
    for bit in bits:
        if bit != out[k] % 2:
            if bit == 0:
                out[k] -= 1
            else:
                out[k] += 1
        k += 1
    return out


def reference_frame(magic: bytes, payload: bytes) -> bytes:
    return (magic + bytes([1]) + len(payload).to_bytes(4, "big") + payload
            + crc32_bitwise(payload).to_bytes(4, "big"))


def bmp_2x2_24bit(pixel_rows) -> bytes:
    """A 2x2 24-bit BMP assembled field by field.

    14-byte file header + 40-byte BITMAPINFOHEADER = 54 bytes; each row is
    2*3 = 6 bytes padded to 8, so the pixel array is 16 bytes and the file
    70 bytes.
    """
    header = b"BM" + (70).to_bytes(4, "little") + bytes(4) + (54).to_bytes(4, "little")
    info = b"".join([
        (40).to_bytes(4, "little"),
        (2).to_bytes(4, "little", signed=True),
        (2).to_bytes(4, "little", signed=True),
        (1).to_bytes(2, "little"),
        (24).to_bytes(2, "little"),
        bytes(4),                     # BI_RGB
        (16).to_bytes(4, "little"),
        bytes(16),
    ])
    assert len(header) + len(info) == 54
    body = b"".join(bytes(r) + b"\0\0" for r in pixel_rows)
    assert len(body) == 16
    return header + info + body


def money_units(text: str) -> int:
    return int(Decimal(text) * 10000)


def float_bits(x: float) -> bytes:
    return struct.pack(">d", x)


# -- in-memory reference store -------------------------------------------------

class RefError(Exception):
    def __init__(self, kind):
        super().__init__(kind)
        self.kind = kind


class ReferenceStore:
    """Plain dict/list model of the table rules.

    Tables are ``name -> {"cols": [(name, kind, length, nullable)],
    "pk": [names], "rows": [dict]}``; links are tuples
    ``(child, child_cols, parent, parent_cols)``.
    """

    def __init__(self):
        self.tables = {}
        self.links = []

    def create(self, name, cols, pk):
        self.tables[name] = {"cols": cols, "pk": list(pk), "rows": []}

    def link(self, child, ccols, parent, pcols):
        self.links.append((child, list(ccols), parent, list(pcols)))

    def _typecheck(self, name, values):
        cols = self.tables[name]["cols"]
        if len(values) != len(cols):
            raise RefError("ArityMismatch")
        for (cname, kind, length, nullable), v in zip(cols, values):
            self._check(cname, kind, length, nullable, v)

    @staticmethod
    def _check(cname, kind, length, nullable, v):
        if v is None:
            if not nullable:
                raise RefError("NullNotAllowed")
            return
        ok = {
            "INT": lambda: type(v) is int,
            "FLOAT": lambda: type(v) is float,
            "BOOLEAN": lambda: type(v) is bool,
            "MONEY": lambda: type(v).__name__ == "Money",
            "TEXT": lambda: type(v) is str,
            "CHAR": lambda: type(v) is str,
        }[kind]()
        if not ok:
            raise RefError("TypeMismatch")
        if kind == "CHAR" and len(v) > length:
            raise RefError("CharTooLong")

    def _key(self, name, row):
        return tuple(row[c] for c in self.tables[name]["pk"])

    def _consistent(self, proposed, changed, freed):
        """Raise the first violation for replacing tables with *proposed*."""
        for name, rows in proposed.items():
            keys = [self._key(name, r) for r in rows]
            for i, k in enumerate(keys):
                if k in keys[:i]:
                    raise RefError("PkViolation")
        for child, ccols, parent, pcols in self.links:
            parents = proposed.get(parent, self.tables[parent]["rows"])
            for r in changed.get(child, []):
                ref = tuple(r[c] for c in ccols)
                if all(v is None for v in ref):
                    continue
                if not any(tuple(p[c] for c in pcols) == ref for p in parents):
                    raise RefError("FkViolation")
        for child, ccols, parent, pcols in self.links:
            gone = freed.get(parent, [])
            if not gone:
                continue
            kids = proposed.get(child, self.tables[child]["rows"])
            if any(tuple(k[c] for c in ccols) in gone for k in kids):
                raise RefError("RestrictViolation")

    @staticmethod
    def _matches(row, conds):
        for col, op, lit in conds:
            v = row[col]
            if v is None or lit is None:
                return False
            if not {"=": v == lit, "!=": v != lit, "<": v < lit, "<=": v <= lit,
                    ">": v > lit, ">=": v >= lit}[op]:
                return False
        return True

    def insert(self, name, values):
        self._typecheck(name, values)
        t = self.tables[name]
        row = dict(zip([c[0] for c in t["cols"]], values))
        proposed = t["rows"] + [row]
        self._consistent({name: proposed}, {name: [row]}, {})
        t["rows"] = proposed

    def select(self, name, conds, columns=None):
        t = self.tables[name]
        names = columns or [c[0] for c in t["cols"]]
        return [tuple(r[c] for c in names) for r in t["rows"] if self._matches(r, conds)]

    def update(self, name, sets, conds):
        t = self.tables[name]
        spec = {c[0]: c for c in t["cols"]}
        for col, v in sets:
            self._check(*spec[col], v)
        proposed, changed, freed, n = [], [], [], 0
        for r in t["rows"]:
            if self._matches(r, conds):
                n += 1
                nr = dict(r)
                nr.update(dict(sets))
                if nr != r:
                    changed.append(nr)
                    if self._key(name, nr) != self._key(name, r):
                        freed.append(self._key(name, r))
                proposed.append(nr)
            else:
                proposed.append(r)
        if changed:
            self._consistent({name: proposed}, {name: changed}, {name: freed})
            t["rows"] = proposed
        return n

    def delete(self, name, conds):
        t = self.tables[name]
        keep = [r for r in t["rows"] if not self._matches(r, conds)]
        gone = [self._key(name, r) for r in t["rows"] if self._matches(r, conds)]
        if gone:
            self._consistent({name: keep}, {}, {name: gone})
            t["rows"] = keep
        return len(gone)
