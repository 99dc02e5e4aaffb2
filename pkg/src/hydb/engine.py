"""The database: a directory of table images and relationship images.

Each table lives in its own image.  The schema sits in the pixel LSBs and
the rows ride in the trailer frame; a relationship image carries one
foreign-key descriptor in its LSBs.  Tables and links are discovered by
scanning the directory and decoding whatever LSB frames are found.

Every mutation rebuilds the whole record block, writes it through
:func:`hydb.image.save_atomic`, and only then updates the in-memory
catalog, so an error or a crash leaves the previous file intact.
"""

from __future__ import annotations

import errno
import fcntl
import logging
import operator
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from . import image, records, schema as schema_mod
from .errors import (
    CorruptFrame,
    DanglingLink,
    DuplicateTable,
    ExistingRowsViolate,
    FkViolation,
    HydbError,
    IntegrityError,
    IoError,
    LinkExists,
    LockHeld,
    MalformedRecordBlock,
    NotPrimaryKey,
    PkViolation,
    PredicateTypeMismatch,
    RestrictViolation,
    TableExists,
    TypeMismatch,
    TypeMismatchLink,
    TypeParseError,
    UnknownColumn,
    UnknownTable,
    UnsupportedFormat,
    UsageError,
)
from .schema import ForeignKey, TableSchema

log = logging.getLogger(__name__)

LOCK_NAME = ".hydb.lock"
IMAGE_EXTENSIONS = ("bmp", "ppm", "pgm")

OPS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


# -- predicates ---------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    column: str
    op: str
    value: Any

    def __post_init__(self):
        if self.op not in OPS:
            raise UsageError(f"unknown comparator {self.op!r}")


@dataclass(frozen=True)
class Predicate:
    """Conjunction of column comparisons; no conditions matches every row."""

    conjuncts: tuple = ()

    @classmethod
    def where(cls, *conditions) -> "Predicate":
        return cls(tuple(c if isinstance(c, Condition) else Condition(*c) for c in conditions))

    def validate(self, s: TableSchema) -> list:
        """Check columns and literal types; return the column positions."""
        positions = []
        for cond in self.conjuncts:
            if cond.column not in s.column_names:
                raise UnknownColumn(s.table_name, cond.column)
            column = s.column(cond.column)
            if cond.value is not None:
                # literals longer than a CHAR column are still comparable
                probe = column if column.dtype.kind != "CHAR" else schema_mod.Column(
                    column.name, schema_mod.TEXT)
                try:
                    records.check_value(probe, cond.value)
                except TypeMismatch:
                    raise PredicateTypeMismatch(cond.column, cond.value) from None
            positions.append(s.index(cond.column))
        return positions

    def compile(self, s: TableSchema):
        positions = self.validate(s)
        tests = [(i, OPS[c.op], c.value) for i, c in zip(positions, self.conjuncts)]

        def match(row) -> bool:
            for i, op, lit in tests:
                v = row[i]
                if v is None or lit is None or not op(v, lit):
                    return False
            return True

        return match


MATCH_ALL = Predicate()


# -- catalog ------------------------------------------------------------------

@dataclass
class Table:
    path: Path
    schema: TableSchema
    container: image.ImageContainer
    rows: list


@dataclass
class Link:
    path: Path
    fk: ForeignKey


@dataclass
class Status:
    ok: bool = True
    detail: str = "ok"

    @classmethod
    def fail(cls, detail) -> "Status":
        return cls(False, str(detail))

    def __str__(self):
        return "ok" if self.ok else f"FAIL ({self.detail})"


SKIPPED = Status(False, "not checked")


@dataclass
class TableReport:
    name: str
    path: str
    frame: Status = field(default_factory=Status)
    schema: Status = field(default_factory=Status)
    records: Status = field(default_factory=Status)
    primary_key: Status = field(default_factory=Status)

    @property
    def ok(self) -> bool:
        return all(s.ok for s in (self.frame, self.schema, self.records, self.primary_key))


@dataclass
class LinkReport:
    name: str
    path: str
    status: Status = field(default_factory=Status)

    @property
    def ok(self) -> bool:
        return self.status.ok


@dataclass
class VerifyReport:
    tables: list = field(default_factory=list)
    links: list = field(default_factory=list)
    files: list = field(default_factory=list)  # (path, Status) for unrecognised images

    @property
    def ok(self) -> bool:
        return (all(t.ok for t in self.tables) and all(l.ok for l in self.links)
                and all(s.ok for _, s in self.files))

    def lines(self) -> list:
        out = []
        for t in self.tables:
            out.append(f"table {t.name} ({t.path}): frame={t.frame} schema={t.schema} "
                       f"records={t.records} primary_key={t.primary_key}")
        for link in self.links:
            out.append(f"link {link.name} ({link.path}): {link.status}")
        for path, status in self.files:
            out.append(f"file {path}: {status}")
        out.append("ok" if self.ok else "FAILED")
        return out


def _project(row, idx) -> tuple:
    return tuple(row[i] for i in idx)


def _image_files(root: Path) -> list:
    out = []
    for p in sorted(root.iterdir()):
        if p.name == LOCK_NAME or p.name.endswith(".tmp") or not p.is_file():
            continue
        out.append(p)
    return out


def _is_image_name(p: Path) -> bool:
    return p.suffix.lower().lstrip(".") in IMAGE_EXTENSIONS


class Catalog:
    """An open database.  Use :func:`open_database` to construct one."""

    def __init__(self, root, *, sync: bool = True):
        self.root = Path(root)
        self.sync = sync
        self.tables: dict = {}
        self.links: list = []
        self.issues: list = []  # (path, error) for files skipped while opening
        self._lock_fd: Optional[int] = None
        self._mutex = threading.RLock()

    # -- lifecycle --

    def _acquire(self) -> None:
        lock_path = self.root / LOCK_NAME
        try:
            fd = os.open(lock_path, os.O_RDWR | os.O_CREAT, 0o644)
        except OSError as exc:
            raise IoError(lock_path, exc) from exc
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as exc:
            os.close(fd)
            if exc.errno in (errno.EWOULDBLOCK, errno.EAGAIN, errno.EACCES):
                raise LockHeld(lock_path) from None
            raise IoError(lock_path, exc) from exc
        os.ftruncate(fd, 0)
        os.write(fd, str(os.getpid()).encode("ascii"))
        self._lock_fd = fd

    def close(self) -> None:
        if self._lock_fd is not None:
            fcntl.flock(self._lock_fd, fcntl.LOCK_UN)
            os.close(self._lock_fd)
            self._lock_fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def closed(self) -> bool:
        return self._lock_fd is None

    def _load(self, strict: bool) -> None:
        for p in self.root.iterdir():
            if p.name.endswith(".tmp") and p.is_file():
                log.warning("removing interrupted write %s", p)
                p.unlink()
        claims: dict = {}
        for p in _image_files(self.root):
            try:
                c = image.parse_image(p.read_bytes())
            except UnsupportedFormat:
                continue
            except HydbError as exc:
                self._problem(p, exc, strict)
                continue
            except OSError as exc:
                raise IoError(p, exc) from exc
            try:
                payload = image.lsb_extract(c)
                if payload is None:
                    continue
                tag = schema_mod.payload_tag(payload)
                if tag == "T":
                    s = schema_mod.decode_schema(payload)
                    rows = _read_rows(s, c)
                    claims.setdefault(s.table_name, []).append(Table(p, s, c, rows))
                elif tag == "F":
                    self.links.append(Link(p, schema_mod.decode_fk(payload)))
            except HydbError as exc:
                self._problem(p, exc, strict)
        for name, tables in claims.items():
            if len(tables) > 1:
                err = DuplicateTable(name, [t.path.name for t in tables])
                if strict:
                    raise err
                self.issues.append((tables[0].path, err))
            self.tables[name] = tables[0]
        good = []
        for link in self.links:
            try:
                self._check_link_shape(link.fk)
                good.append(link)
            except HydbError as exc:
                self._problem(link.path, exc, strict)
        self.links = good

    def _problem(self, path, exc, strict) -> None:
        if strict:
            raise exc
        log.warning("skipping %s: %s", path, exc)
        self.issues.append((path, exc))

    # -- lookups --

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise UnknownTable(name) from None

    def schema(self, name: str) -> TableSchema:
        return self.table(name).schema

    def _check_link_shape(self, fk: ForeignKey) -> None:
        schema_mod.validate_fk(fk)
        for tname, cols in ((fk.child_table, fk.child_columns), (fk.parent_table, fk.parent_columns)):
            if tname not in self.tables:
                raise DanglingLink(f"{fk}: no table {tname!r}")
            names = self.tables[tname].schema.column_names
            for col in cols:
                if col not in names:
                    raise DanglingLink(f"{fk}: no column {tname}.{col}")
        parent = self.tables[fk.parent_table].schema
        if tuple(fk.parent_columns) != tuple(parent.primary_key):
            raise NotPrimaryKey(f"{fk}: parent columns must be the primary key "
                                f"({', '.join(parent.primary_key)})")
        child = self.tables[fk.child_table].schema
        for cc, pc in zip(fk.child_columns, fk.parent_columns):
            ct, pt = child.column(cc).dtype, parent.column(pc).dtype
            if ct != pt:
                raise TypeMismatchLink(f"{fk}: {cc} is {ct} but {pc} is {pt}")

    def _links_as_child(self, name):
        return [l.fk for l in self.links if l.fk.child_table == name]

    def _links_as_parent(self, name):
        return [l.fk for l in self.links if l.fk.parent_table == name]

    # -- persistence --

    def _store(self, t: Table, rows: list) -> None:
        block = records.encode_records(t.schema, rows)
        c = image.write_trailer(t.container, block)
        image.save_atomic(c, t.path, sync=self.sync)
        t.container = c
        t.rows = rows

    # -- constraint checks over a proposed state --

    def _orphans(self, fk: ForeignKey, child_rows, parent_rows) -> list:
        """Child rows whose non-NULL FK projection has no parent key."""
        cs, ps = self.schema(fk.child_table), self.schema(fk.parent_table)
        cidx = [cs.index(c) for c in fk.child_columns]
        pidx = [ps.index(c) for c in fk.parent_columns]
        keys = {_project(r, pidx) for r in parent_rows}
        out = []
        for r in child_rows:
            proj = _project(r, cidx)
            if all(v is None for v in proj):
                continue
            if proj not in keys:
                out.append(proj)
        return out

    def _check_state(self, name: str, new_rows: list, touched: list, released: set) -> None:
        """Validate *new_rows* as the next contents of table *name*.

        *touched* are the inserted or changed rows; only their foreign keys
        are checked against parents.  *released* holds primary keys that
        were deleted or changed away and must not be referenced by a child.
        """
        s = self.schema(name)
        kidx = s.key_indexes
        seen = set()
        for r in new_rows:
            key = _project(r, kidx)
            if key in seen:
                raise PkViolation(name, key)
            seen.add(key)
        for fk in self._links_as_child(name):
            parents = new_rows if fk.parent_table == name else self.table(fk.parent_table).rows
            missing = self._orphans(fk, touched, parents)
            if missing:
                raise FkViolation(fk, missing[0])
        if not released:
            return
        for fk in self._links_as_parent(name):
            children = new_rows if fk.child_table == name else self.table(fk.child_table).rows
            cs = self.schema(fk.child_table)
            cidx = [cs.index(c) for c in fk.child_columns]
            count = sum(1 for r in children if _project(r, cidx) in released)
            if count:
                raise RestrictViolation(fk, count)

    # -- DDL --

    def create_table(self, s: TableSchema, cover) -> Path:
        """Copy *cover* into the database and embed *s* in it."""
        with self._mutex:
            schema_mod.validate_schema(s)
            if s.table_name in self.tables:
                raise TableExists(s.table_name)
            c = image.load_image(cover)
            c = schema_mod.embed_schema(c, s)
            c = image.write_trailer(c, b"")
            path = self.root / f"{s.table_name}.{c.extension}"
            if path.exists():
                raise TableExists(s.table_name)
            image.save_atomic(c, path, sync=self.sync)
            self.tables[s.table_name] = Table(path, s, c, [])
            return path

    def create_foreign_key(self, fk: ForeignKey, cover) -> Path:
        with self._mutex:
            self._check_link_shape(fk)
            if any(l.fk == fk for l in self.links):
                raise LinkExists(f"{fk} already exists")
            orphans = self._orphans(fk, self.table(fk.child_table).rows,
                                    self.table(fk.parent_table).rows)
            if orphans:
                raise ExistingRowsViolate(len(orphans))
            c = schema_mod.embed_fk(image.load_image(cover), fk)
            stem = f"{fk.child_table}__{fk.parent_table}"
            path = self.root / f"{stem}.fk.{c.extension}"
            n = 2
            while path.exists():
                path = self.root / f"{stem}.{n}.fk.{c.extension}"
                n += 1
            image.save_atomic(c, path, sync=self.sync)
            self.links.append(Link(path, fk))
            return path

    def drop_table(self, name: str) -> None:
        with self._mutex:
            t = self.table(name)
            users = [l.fk for l in self.links if name in (l.fk.child_table, l.fk.parent_table)]
            if users:
                raise LinkExists(f"table {name!r} is used by link {users[0]}")
            try:
                t.path.unlink()
            except OSError as exc:
                raise IoError(t.path, exc) from exc
            del self.tables[name]

    # -- DML --

    def insert(self, table: str, row: Sequence) -> None:
        with self._mutex:
            t = self.table(table)
            row = tuple(row)
            records.typecheck_row(t.schema, row)
            new_rows = t.rows + [row]
            self._check_state(table, new_rows, [row], set())
            self._store(t, new_rows)

    def insert_many(self, table: str, rows: Iterable[Sequence]) -> int:
        """Insert several rows with a single rewrite; all or nothing."""
        with self._mutex:
            t = self.table(table)
            rows = [tuple(r) for r in rows]
            for r in rows:
                records.typecheck_row(t.schema, r)
            if not rows:
                return 0
            new_rows = t.rows + rows
            self._check_state(table, new_rows, rows, set())
            self._store(t, new_rows)
            return len(rows)

    def select(self, table: str, where: Predicate = MATCH_ALL,
               columns: Optional[Sequence[str]] = None) -> list:
        with self._mutex:
            t = self.table(table)
            match = where.compile(t.schema)
            if columns is None:
                idx = list(range(len(t.schema.columns)))
            else:
                for c in columns:
                    if c not in t.schema.column_names:
                        raise UnknownColumn(table, c)
                idx = [t.schema.index(c) for c in columns]
            return [_project(r, idx) for r in t.rows if match(r)]

    def update(self, table: str, assignments, where: Predicate = MATCH_ALL) -> int:
        """Apply ``{column: value}`` (or pairs) to matching rows.

        Returns the number of matching rows.  Nothing is written when any
        constraint would break.
        """
        with self._mutex:
            t = self.table(table)
            s = t.schema
            pairs = list(assignments.items() if isinstance(assignments, dict) else assignments)
            sets = {}
            for col, value in pairs:
                if col not in s.column_names:
                    raise UnknownColumn(table, col)
                if col in sets:
                    raise UsageError(f"column {col!r} assigned twice")
                records.check_value(s.column(col), value)
                sets[s.index(col)] = value
            match = where.compile(s)
            kidx = s.key_indexes
            new_rows, touched, released, count = [], [], set(), 0
            for r in t.rows:
                if match(r):
                    count += 1
                    nr = tuple(sets.get(i, v) for i, v in enumerate(r))
                    if nr != r:
                        touched.append(nr)
                        if _project(nr, kidx) != _project(r, kidx):
                            released.add(_project(r, kidx))
                    new_rows.append(nr)
                else:
                    new_rows.append(r)
            if touched:
                self._check_state(table, new_rows, touched, released)
                self._store(t, new_rows)
            return count

    def delete(self, table: str, where: Predicate = MATCH_ALL) -> int:
        with self._mutex:
            t = self.table(table)
            match = where.compile(t.schema)
            keep, released = [], set()
            for r in t.rows:
                if match(r):
                    released.add(_project(r, t.schema.key_indexes))
                else:
                    keep.append(r)
            count = len(t.rows) - len(keep)
            if count:
                self._check_state(table, keep, [], released)
                self._store(t, keep)
            return count

    # -- integrity --

    def verify(self) -> VerifyReport:
        """Re-read every file in the directory and check all invariants."""
        with self._mutex:
            return verify_directory(self.root, expected=[t.path for t in self.tables.values()]
                                    + [l.path for l in self.links])


def _read_rows(s: TableSchema, c: image.ImageContainer) -> list:
    block = image.read_trailer(c)
    if block is None:
        raise CorruptFrame("table image has no record block")
    try:
        return records.decode_records(s, block)
    except TypeParseError as exc:
        raise MalformedRecordBlock(exc.line, str(exc)) from None


def verify_directory(root, expected: Iterable = ()) -> VerifyReport:
    """Check every image in *root* without touching anything.

    Paths in *expected* that are missing from disk are reported too.
    """
    root = Path(root)
    report = VerifyReport()
    tables: dict = {}
    links = []
    for p in _image_files(root):
        try:
            c = image.parse_image(p.read_bytes())
        except UnsupportedFormat as exc:
            if _is_image_name(p):
                report.files.append((p.name, Status.fail(exc)))
            continue
        except (HydbError, OSError) as exc:
            report.files.append((p.name, Status.fail(exc)))
            continue
        try:
            payload = image.lsb_extract(c)
        except CorruptFrame as exc:
            tr = TableReport("?", p.name, frame=Status.fail(exc), schema=SKIPPED,
                             records=SKIPPED, primary_key=SKIPPED)
            report.tables.append(tr)
            continue
        if payload is None:
            report.files.append((p.name, Status.fail("no embedded frame")))
            continue
        tag = schema_mod.payload_tag(payload)
        if tag == "F":
            lr = LinkReport("?", p.name)
            try:
                fk = schema_mod.decode_fk(payload)
                lr.name = str(fk)
                links.append((lr, fk))
            except IntegrityError as exc:
                lr.status = Status.fail(exc)
            report.links.append(lr)
            continue
        tr = TableReport("?", p.name)
        report.tables.append(tr)
        try:
            s = schema_mod.decode_schema(payload)
        except IntegrityError as exc:
            tr.schema = Status.fail(exc)
            tr.records = tr.primary_key = SKIPPED
            continue
        tr.name = s.table_name
        if s.table_name in tables:
            tr.schema = Status.fail(f"table name also claimed by {tables[s.table_name][0].path}")
        try:
            rows = _read_rows(s, c)
        except HydbError as exc:
            tr.records = Status.fail(exc)
            tr.primary_key = SKIPPED
            continue
        keys = [_project(r, s.key_indexes) for r in rows]
        if len(set(keys)) != len(keys):
            dup = next(k for i, k in enumerate(keys) if k in keys[:i])
            tr.primary_key = Status.fail(f"duplicate key {dup!r}")
        tables.setdefault(s.table_name, (tr, s, rows))
    for lr, fk in links:
        lr.status = _check_link_rows(fk, tables)
    present = {p.name for p in _image_files(root)}
    for path in expected:
        if Path(path).name not in present:
            report.files.append((Path(path).name, Status.fail("file missing")))
    return report


def _check_link_rows(fk: ForeignKey, tables: dict) -> Status:
    for name in (fk.child_table, fk.parent_table):
        if name not in tables:
            return Status.fail(f"table {name!r} missing or unreadable")
    _, cs, crows = tables[fk.child_table]
    _, ps, prows = tables[fk.parent_table]
    try:
        cidx = [cs.index(c) for c in fk.child_columns]
        pidx = [ps.index(c) for c in fk.parent_columns]
    except ValueError:
        return Status.fail("link names unknown columns")
    if tuple(fk.parent_columns) != ps.primary_key:
        return Status.fail("parent columns are not the primary key")
    for cc, pc in zip(cidx, pidx):
        if cs.columns[cc].dtype != ps.columns[pc].dtype:
            return Status.fail("column types differ")
    keys = {_project(r, pidx) for r in prows}
    orphans = [p for p in (_project(r, cidx) for r in crows)
               if not all(v is None for v in p) and p not in keys]
    if orphans:
        return Status.fail(f"{len(orphans)} orphan row(s), first key {orphans[0]!r}")
    return Status()


def open_database(root, *, strict: bool = True, sync: bool = True, create: bool = False) -> Catalog:
    """Lock *root* and load every table and link image in it.

    With ``strict`` off, unreadable files and inconsistent links are
    recorded in :attr:`Catalog.issues` instead of raising; ``verify`` still
    reports them.  ``sync=False`` skips fsync calls.
    """
    root = Path(root)
    if create:
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(root, exc) from exc
    if not root.is_dir():
        raise IoError(root, "not a directory")
    cat = Catalog(root, sync=sync)
    cat._acquire()
    try:
        cat._load(strict)
    except BaseException:
        cat.close()
        raise
    return cat
