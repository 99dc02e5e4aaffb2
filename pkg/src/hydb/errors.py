"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
1 usage/validation, 2 constraint violation, 3 corruption/integrity, 4 I/O.
"""


class HydbError(Exception):
    exit_code = 1


class UsageError(HydbError):
    exit_code = 1


class ConstraintError(HydbError):
    exit_code = 2


class IntegrityError(HydbError):
    exit_code = 3


class IoError(HydbError):
    exit_code = 4

    def __init__(self, path, cause):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{self.path}: {cause}")


# -- image container ---------------------------------------------------------

class UnsupportedFormat(UsageError):
    pass


class CompressedImage(UnsupportedFormat):
    pass


class MalformedHeader(IntegrityError):
    pass


class InsufficientCapacity(UsageError):
    def __init__(self, needed, available):
        self.needed = needed
        self.available = available
        super().__init__(
            f"payload needs {needed} pixel bytes, image offers {available}")


class ChannelOccupied(UsageError):
    pass


class CorruptFrame(IntegrityError):
    pass


# -- schema ------------------------------------------------------------------

class SchemaError(UsageError):
    pass


class DuplicateColumn(SchemaError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"duplicate column {name!r}")


class EmptyPrimaryKey(SchemaError):
    pass


class UnknownPkColumn(SchemaError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"primary key column {name!r} is not a column")


class NullablePkColumn(SchemaError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"primary key column {name!r} must be NOT NULL")


class BadIdentifier(SchemaError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"bad identifier {name!r}")


class BadForeignKey(SchemaError):
    pass


class MalformedSchemaText(IntegrityError):
    pass


class MalformedFkText(IntegrityError):
    pass


# -- records -----------------------------------------------------------------

class BadValue(UsageError):
    """Base for value parsing and row typing problems."""


class TypeParseError(BadValue):
    def __init__(self, text, expected, line=None):
        self.text = text
        self.expected = expected
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"cannot read {text!r} as {expected}{where}")


class CharTooLong(BadValue):
    def __init__(self, text, limit):
        self.text = text
        self.limit = limit
        super().__init__(f"{text!r} is longer than CHAR({limit})")


class MoneyPrecisionExceeded(BadValue):
    def __init__(self, text):
        self.text = text
        super().__init__(f"{text!r} has more than 4 fraction digits")


class IntOutOfRange(BadValue):
    def __init__(self, text):
        self.text = text
        super().__init__(f"{text!r} does not fit in 64 bits")


class ArityMismatch(BadValue):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"row has {got} values, table has {expected} columns")


class TypeMismatch(BadValue):
    def __init__(self, column, detail=""):
        self.column = column
        super().__init__(f"wrong value type for column {column!r}{detail}")


class NullNotAllowed(ConstraintError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} is NOT NULL")


class MalformedRecordBlock(IntegrityError):
    def __init__(self, line, detail):
        self.line = line
        super().__init__(f"record block line {line}: {detail}")


# -- engine ------------------------------------------------------------------

class LockHeld(IoError):
    def __init__(self, path):
        super().__init__(path, "database is locked by another process")


class UnknownTable(UsageError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"no such table {name!r}")


class UnknownColumn(UsageError):
    def __init__(self, table, name):
        self.table = table
        self.name = name
        super().__init__(f"table {table!r} has no column {name!r}")


class PredicateTypeMismatch(UsageError):
    def __init__(self, column, value):
        self.column = column
        self.value = value
        super().__init__(f"literal {value!r} does not match type of {column!r}")


class TableExists(ConstraintError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"table {name!r} already exists")


class DuplicateTable(IntegrityError):
    def __init__(self, name, paths):
        self.name = name
        self.paths = paths
        super().__init__(f"table {name!r} claimed by {', '.join(paths)}")


class DanglingLink(ConstraintError):
    pass


class NotPrimaryKey(DanglingLink):
    pass


class TypeMismatchLink(ConstraintError):
    pass


class LinkExists(ConstraintError):
    pass


class PkViolation(ConstraintError):
    def __init__(self, table, key):
        self.table = table
        self.key = tuple(key)
        super().__init__(f"duplicate primary key {self.key!r} in {table!r}")


class FkViolation(ConstraintError):
    def __init__(self, link, key):
        self.link = link
        self.key = tuple(key)
        super().__init__(
            f"no {link.parent_table!r} row with key {self.key!r} "
            f"(required by {link.child_table}.{','.join(link.child_columns)})")


class RestrictViolation(ConstraintError):
    def __init__(self, link, children):
        self.link = link
        self.children = children
        super().__init__(
            f"{children} row(s) in {link.child_table!r} still reference "
            f"{link.parent_table!r}")


class ExistingRowsViolate(ConstraintError):
    def __init__(self, count):
        self.count = count
        super().__init__(f"{count} existing child row(s) have no parent")
