"""Text forms of rows, predicates and assignments for the command line."""

from __future__ import annotations

import csv
import io
import re
from typing import Optional

from .engine import Condition, Predicate
from .errors import ArityMismatch, UnknownColumn, UsageError
from .records import parse_value, render_value
from .schema import TableSchema

NULL_TEXT = "\\N"

_LITERAL = r"""'(?:[^']|'')*'|"(?:[^"]|"")*"|[^\s'"]\S*"""
_CONDITION = re.compile(
    rf"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(<=|>=|!=|=|<|>)\s*({_LITERAL})\s*", re.S)
_AND = re.compile(r"AND\b", re.I)
_ASSIGN = re.compile(
    rf"""\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*('(?:[^']|'')*'|"(?:[^"]|"")*"|[^,]*?)\s*(?:,|\Z)""",
    re.S)


def _unquote(token: str) -> tuple:
    """Return ``(text, quoted)`` for a literal token."""
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        q = token[0]
        return token[1:-1].replace(q + q, q), True
    return token, False


def _literal(s: TableSchema, column: str, token: str):
    if column not in s.column_names:
        raise UnknownColumn(s.table_name, column)
    text, quoted = _unquote(token)
    if not quoted and text == NULL_TEXT:
        return None
    return parse_value(text, s.column(column).dtype)


def parse_where(s: TableSchema, text: Optional[str]) -> Predicate:
    """Parse ``col OP literal [AND col OP literal ...]``."""
    if text is None or not text.strip():
        return Predicate()
    conds, pos = [], 0
    while True:
        m = _CONDITION.match(text, pos)
        if m is None:
            raise UsageError(f"cannot parse condition at {text[pos:]!r}")
        col, op, token = m.groups()
        conds.append(Condition(col, op, _literal(s, col, token)))
        pos = m.end()
        if pos == len(text):
            return Predicate(tuple(conds))
        a = _AND.match(text, pos)
        if a is None:
            raise UsageError(f"expected AND at {text[pos:]!r}")
        pos = a.end()


def parse_assignments(s: TableSchema, text: str) -> list:
    """Parse ``col=literal,col=literal``."""
    out, pos = [], 0
    if not text.strip():
        raise UsageError("empty --set")
    while pos < len(text):
        m = _ASSIGN.match(text, pos)
        if m is None or m.end() == pos:
            raise UsageError(f"cannot parse assignment at {text[pos:]!r}")
        col, token = m.groups()
        out.append((col, _literal(s, col, token)))
        pos = m.end()
    return out


def parse_row(s: TableSchema, text: str) -> tuple:
    """Parse one CSV line of values (``\\N`` is NULL) against *s*."""
    fields = next(csv.reader([text]), [])
    if len(fields) != len(s.columns):
        raise ArityMismatch(len(s.columns), len(fields))
    return tuple(None if f == NULL_TEXT else parse_value(f, c.dtype)
                 for c, f in zip(s.columns, fields))


def format_rows(rows, output: str = "csv") -> str:
    buf = io.StringIO()
    delimiter = {"csv": ",", "tsv": "\t"}[output]
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    for row in rows:
        writer.writerow([NULL_TEXT if v is None else render_value(v) for v in row])
    return buf.getvalue()


def parse_table_ref(text: str) -> tuple:
    """``t(a,b)`` -> ``("t", ["a", "b"])``."""
    m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*\(([^()]*)\)\s*", text)
    if m is None:
        raise UsageError(f"expected table(col,...), got {text!r}")
    cols = [c.strip() for c in m.group(2).split(",")]
    if not all(cols):
        raise UsageError(f"empty column name in {text!r}")
    return m.group(1), cols
