"""Table schemas, foreign-key descriptors and their text encodings.

Schema payload (UTF-8, LF-terminated lines, fields split by 0x1F)::

    T<US>table
    C<US>column<US>TYPE<US>NULL|NOTNULL      (one per column, in order)
    P<US>col<US>col...

Foreign-key payload is a single line::

    F<US>child<US>c1,c2<US>parent<US>p1,p2<US>RESTRICT
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

from . import image
from .errors import (
    BadForeignKey,
    BadIdentifier,
    DuplicateColumn,
    EmptyPrimaryKey,
    MalformedFkText,
    MalformedSchemaText,
    NullablePkColumn,
    SchemaError,
    UnknownPkColumn,
)

US = "\x1f"
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]{0,63}\Z")
_CHAR = re.compile(r"CHAR\(([1-9][0-9]*)\)\Z")

KINDS = ("CHAR", "TEXT", "INT", "FLOAT", "MONEY", "BOOLEAN")


@dataclass(frozen=True)
class DataType:
    kind: str
    length: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown type {self.kind!r}")
        if self.kind == "CHAR":
            if not isinstance(self.length, int) or self.length < 1:
                raise SchemaError("CHAR length must be a positive integer")
        elif self.length is not None:
            raise SchemaError(f"{self.kind} takes no length")

    def __str__(self):
        return f"CHAR({self.length})" if self.kind == "CHAR" else self.kind

    @classmethod
    def parse(cls, token: str) -> "DataType":
        """Read a type token such as ``INT`` or ``CHAR(40)`` (exact case)."""
        m = _CHAR.match(token)
        if m:
            return cls("CHAR", int(m.group(1)))
        if token in KINDS and token != "CHAR":
            return cls(token)
        raise SchemaError(f"bad type {token!r}")

    @property
    def numeric(self) -> bool:
        return self.kind in ("INT", "FLOAT", "MONEY")


def CHAR(n: int) -> DataType:
    return DataType("CHAR", n)


TEXT = DataType("TEXT")
INT = DataType("INT")
FLOAT = DataType("FLOAT")
MONEY = DataType("MONEY")
BOOLEAN = DataType("BOOLEAN")


@dataclass(frozen=True)
class Column:
    name: str
    dtype: DataType
    nullable: bool = True


@dataclass(frozen=True)
class TableSchema:
    table_name: str
    columns: tuple
    primary_key: tuple

    def __init__(self, table_name: str, columns: Sequence[Column], primary_key: Sequence[str]):
        object.__setattr__(self, "table_name", table_name)
        object.__setattr__(self, "columns", tuple(columns))
        object.__setattr__(self, "primary_key", tuple(primary_key))

    @property
    def column_names(self) -> list:
        return [c.name for c in self.columns]

    def index(self, name: str) -> int:
        """Position of column *name*; ``ValueError`` if absent."""
        return self.column_names.index(name)

    def column(self, name: str) -> Column:
        return self.columns[self.index(name)]

    @property
    def key_indexes(self) -> list:
        return [self.index(n) for n in self.primary_key]


@dataclass(frozen=True)
class ForeignKey:
    child_table: str
    child_columns: tuple
    parent_table: str
    parent_columns: tuple
    policy: str = "RESTRICT"

    def __init__(self, child_table, child_columns, parent_table, parent_columns, policy="RESTRICT"):
        object.__setattr__(self, "child_table", child_table)
        object.__setattr__(self, "child_columns", tuple(child_columns))
        object.__setattr__(self, "parent_table", parent_table)
        object.__setattr__(self, "parent_columns", tuple(parent_columns))
        object.__setattr__(self, "policy", policy)

    def __str__(self):
        return (f"{self.child_table}({','.join(self.child_columns)}) -> "
                f"{self.parent_table}({','.join(self.parent_columns)})")


def check_identifier(name) -> None:
    if not isinstance(name, str) or not _IDENT.match(name):
        raise BadIdentifier(name)


def validate_schema(s: TableSchema) -> None:
    check_identifier(s.table_name)
    seen = set()
    for col in s.columns:
        check_identifier(col.name)
        if not isinstance(col.dtype, DataType):
            raise SchemaError(f"column {col.name!r} has no data type")
        if col.name in seen:
            raise DuplicateColumn(col.name)
        seen.add(col.name)
    if not s.primary_key:
        raise EmptyPrimaryKey("primary key must name at least one column")
    pk_seen = set()
    for name in s.primary_key:
        if name not in seen:
            raise UnknownPkColumn(name)
        if name in pk_seen:
            raise DuplicateColumn(name)
        pk_seen.add(name)
        if s.column(name).nullable:
            raise NullablePkColumn(name)


def validate_fk(f: ForeignKey) -> None:
    for name in (f.child_table, f.parent_table, *f.child_columns, *f.parent_columns):
        check_identifier(name)
    if not f.child_columns or len(f.child_columns) != len(f.parent_columns):
        raise BadForeignKey("child and parent column lists must have equal, non-zero length")
    if len(set(f.child_columns)) != len(f.child_columns):
        raise BadForeignKey("child columns repeat")
    if len(set(f.parent_columns)) != len(f.parent_columns):
        raise BadForeignKey("parent columns repeat")
    if f.child_table == f.parent_table and set(f.child_columns) & set(f.parent_columns):
        raise BadForeignKey("self-reference must use disjoint column lists")
    if f.policy != "RESTRICT":
        raise BadForeignKey(f"unsupported policy {f.policy!r}")


# -- text codec ---------------------------------------------------------------

def encode_schema(s: TableSchema) -> bytes:
    validate_schema(s)
    lines = [f"T{US}{s.table_name}"]
    for col in s.columns:
        null = "NULL" if col.nullable else "NOTNULL"
        lines.append(f"C{US}{col.name}{US}{col.dtype}{US}{null}")
    lines.append(US.join(["P", *s.primary_key]))
    return "".join(line + "\n" for line in lines).encode("utf-8")


def _lines(b: bytes, error) -> list:
    try:
        text = bytes(b).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise error(f"payload is not UTF-8: {exc}") from None
    if not text.endswith("\n"):
        raise error("payload must end with a line feed")
    return text[:-1].split("\n")


def decode_schema(b: bytes) -> TableSchema:
    lines = _lines(b, MalformedSchemaText)
    if len(lines) < 2:
        raise MalformedSchemaText("need T and P lines")
    head = lines[0].split(US)
    if head[0] != "T" or len(head) != 2:
        raise MalformedSchemaText(f"first line must be T<US>name, got {lines[0]!r}")
    columns = []
    for n, line in enumerate(lines[1:-1], start=2):
        fields = line.split(US)
        if fields[0] != "C":
            raise MalformedSchemaText(f"line {n}: expected a C line")
        if len(fields) != 4:
            raise MalformedSchemaText(f"line {n}: C line needs 4 fields")
        _, name, token, null = fields
        try:
            dtype = DataType.parse(token)
        except SchemaError:
            raise MalformedSchemaText(f"line {n}: bad type token {token!r}") from None
        if null not in ("NULL", "NOTNULL"):
            raise MalformedSchemaText(f"line {n}: bad nullability {null!r}")
        columns.append(Column(name, dtype, null == "NULL"))
    tail = lines[-1].split(US)
    if tail[0] != "P":
        raise MalformedSchemaText("last line must be the P line")
    schema = TableSchema(head[1], columns, tail[1:])
    try:
        validate_schema(schema)
    except SchemaError as exc:
        raise MalformedSchemaText(str(exc)) from None
    return schema


def encode_fk(f: ForeignKey) -> bytes:
    validate_fk(f)
    fields = ["F", f.child_table, ",".join(f.child_columns),
              f.parent_table, ",".join(f.parent_columns), f.policy]
    return (US.join(fields) + "\n").encode("utf-8")


def decode_fk(b: bytes) -> ForeignKey:
    lines = _lines(b, MalformedFkText)
    if len(lines) != 1:
        raise MalformedFkText("FK payload is a single line")
    fields = lines[0].split(US)
    if len(fields) != 6 or fields[0] != "F":
        raise MalformedFkText("expected F line with 6 fields")
    _, child, ccols, parent, pcols, policy = fields
    fk = ForeignKey(child, ccols.split(","), parent, pcols.split(","), policy)
    try:
        validate_fk(fk)
    except SchemaError as exc:
        raise MalformedFkText(str(exc)) from None
    return fk


def payload_tag(payload: bytes) -> Optional[str]:
    """``"T"`` for a table payload, ``"F"`` for a link payload, else None."""
    if payload[:2] == b"T" + US.encode():
        return "T"
    if payload[:2] == b"F" + US.encode():
        return "F"
    return None


# -- LSB placement ------------------------------------------------------------

def embed_schema(c: image.ImageContainer, s: TableSchema) -> image.ImageContainer:
    return image.lsb_embed(c, encode_schema(s))


def extract_schema(c: image.ImageContainer) -> Optional[TableSchema]:
    payload = image.lsb_extract(c)
    if payload is None:
        return None
    return decode_schema(payload)


def embed_fk(c: image.ImageContainer, f: ForeignKey) -> image.ImageContainer:
    return image.lsb_embed(c, encode_fk(f))


def extract_fk(c: image.ImageContainer) -> Optional[ForeignKey]:
    payload = image.lsb_extract(c)
    if payload is None:
        return None
    return decode_fk(payload)


# -- DDL ----------------------------------------------------------------------

_DDL = re.compile(r"\s*([A-Za-z_]\w*)\s*\((.*)\)\s*\Z", re.S)
_DDL_PK = re.compile(r"PRIMARY\s+KEY\s*\((.*)\)\Z", re.I | re.S)
_DDL_COL = re.compile(
    r"([A-Za-z_]\w*)\s+([A-Za-z]+(?:\s*\(\s*\d+\s*\))?)(\s+NOT\s+NULL|\s+NULL)?\Z",
    re.I | re.S)


def _split_top(text: str) -> list:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def parse_ddl(text: str) -> TableSchema:
    """Parse ``name(col TYPE [NOT NULL], ..., PRIMARY KEY(col, ...))``.

    Type names are case-insensitive.  Primary-key columns are NOT NULL even
    when not declared so.
    """
    m = _DDL.match(text)
    if m is None:
        raise SchemaError(f"cannot parse table definition {text!r}")
    name, body = m.groups()
    columns, pk = [], None
    for item in _split_top(body):
        pm = _DDL_PK.match(item)
        if pm:
            if pk is not None:
                raise SchemaError("PRIMARY KEY given twice")
            pk = [p.strip() for p in pm.group(1).split(",") if p.strip()]
            continue
        cm = _DDL_COL.match(item)
        if cm is None:
            raise SchemaError(f"cannot parse column definition {item!r}")
        token = re.sub(r"\s+", "", cm.group(2)).upper()
        if token == "BOOL":
            token = "BOOLEAN"
        dtype = DataType.parse(token)
        not_null = bool(cm.group(3)) and "NOT" in cm.group(3).upper()
        columns.append(Column(cm.group(1), dtype, not not_null))
    pk = pk or []
    columns = [Column(c.name, c.dtype, False) if c.name in pk else c for c in columns]
    schema = TableSchema(name, columns, pk)
    validate_schema(schema)
    return schema


def format_ddl(s: TableSchema) -> str:
    cols = [f"{c.name} {c.dtype}{'' if c.nullable else ' NOT NULL'}" for c in s.columns]
    return f"{s.table_name}({', '.join(cols)}, PRIMARY KEY({', '.join(s.primary_key)}))"
