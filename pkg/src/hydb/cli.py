"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 constraint violation,
3 corruption or failed verification, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import engine, query
from .errors import HydbError, IoError, UsageError
from .schema import ForeignKey, parse_ddl

EXIT_OK, EXIT_USAGE, EXIT_CONSTRAINT, EXIT_CORRUPT, EXIT_IO = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hydb", description="Relational tables stored inside image files.")
    p.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("init", help="create an empty database directory")
    s.add_argument("dir")

    s = sub.add_parser("create-table", help="embed a table schema into a copy of a cover image")
    s.add_argument("dir")
    s.add_argument("--cover", required=True)
    s.add_argument("--schema", required=True,
                   help='e.g. "emp(id INT NOT NULL, name CHAR(40), PRIMARY KEY(id))"')

    s = sub.add_parser("insert", help="append one row")
    s.add_argument("dir")
    s.add_argument("table")
    s.add_argument("--values", required=True, help='CSV line; \\N is NULL')

    s = sub.add_parser("select", help="print matching rows")
    s.add_argument("dir")
    s.add_argument("table")
    s.add_argument("--where")
    s.add_argument("--columns")
    s.add_argument("--output", choices=("csv", "tsv"), default="csv")

    s = sub.add_parser("update", help="change matching rows, print the match count")
    s.add_argument("dir")
    s.add_argument("table")
    s.add_argument("--set", required=True, dest="assignments")
    s.add_argument("--where")

    s = sub.add_parser("delete", help="remove matching rows, print the count")
    s.add_argument("dir")
    s.add_argument("table")
    s.add_argument("--where")

    s = sub.add_parser("link", help="add a foreign key stored in its own image")
    s.add_argument("dir")
    s.add_argument("--child", required=True, help="table(col,...)")
    s.add_argument("--parent", required=True, help="table(col,...)")
    s.add_argument("--cover", required=True)

    s = sub.add_parser("drop-table", help="delete a table image")
    s.add_argument("dir")
    s.add_argument("table")

    s = sub.add_parser("verify", help="check every frame, record block and constraint")
    s.add_argument("dir")

    s = sub.add_parser("inspect", help="describe one image file")
    s.add_argument("image")
    s.add_argument("--cover", help="original cover for a byte-delta histogram")
    s.add_argument("--plot", metavar="PNG", help="also render the report as a figure")
    return p


def _columns(text):
    if text is None:
        return None
    cols = [c.strip() for c in text.split(",")]
    if not all(cols):
        raise UsageError(f"bad --columns {text!r}")
    return cols


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(path, exc) from exc


def _inspect(args, out) -> int:
    from .inspection import inspect_image

    cover = _read(args.cover) if args.cover else None
    info = inspect_image(_read(args.image), cover)
    for line in info.lines():
        print(line, file=out)
    if args.plot:
        from .plotting import render_inspection

        render_inspection(info, args.plot)
    return EXIT_CORRUPT if info.corrupt else EXIT_OK


def _verify(args, out) -> int:
    with engine.open_database(args.dir, strict=False) as cat:
        report = cat.verify()
        for path, exc in cat.issues:
            print(f"open {Path(path).name}: {exc}", file=sys.stderr)
    for line in report.lines():
        print(line, file=out)
    return EXIT_OK if report.ok else EXIT_CORRUPT


def dispatch(args, out) -> int:
    cmd = args.command
    if cmd == "inspect":
        return _inspect(args, out)
    if cmd == "verify":
        return _verify(args, out)
    with engine.open_database(args.dir, create=cmd == "init") as cat:
        if cmd == "init":
            pass
        elif cmd == "create-table":
            cat.create_table(parse_ddl(args.schema), args.cover)
        elif cmd == "insert":
            cat.insert(args.table, query.parse_row(cat.schema(args.table), args.values))
        elif cmd == "select":
            s = cat.schema(args.table)
            rows = cat.select(args.table, query.parse_where(s, args.where), _columns(args.columns))
            out.write(query.format_rows(rows, args.output))
        elif cmd == "update":
            s = cat.schema(args.table)
            n = cat.update(args.table, query.parse_assignments(s, args.assignments),
                           query.parse_where(s, args.where))
            print(n, file=out)
        elif cmd == "delete":
            n = cat.delete(args.table, query.parse_where(cat.schema(args.table), args.where))
            print(n, file=out)
        elif cmd == "link":
            child, ccols = query.parse_table_ref(args.child)
            parent, pcols = query.parse_table_ref(args.parent)
            cat.create_foreign_key(ForeignKey(child, ccols, parent, pcols), args.cover)
        elif cmd == "drop-table":
            cat.drop_table(args.table)
    return EXIT_OK


def run(argv=None, out=None) -> int:
    """Run one command; return its exit code instead of exiting."""
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"hydb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return exc.code or EXIT_OK
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args, out)
    except HydbError as exc:
        print(f"hydb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"hydb: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
