"""Relational tables kept inside ordinary image files."""

from .engine import Catalog, Condition, Predicate, VerifyReport, open_database, verify_directory
from .image import ImageContainer, parse_image
from .records import Money
from .schema import BOOLEAN, CHAR, FLOAT, INT, MONEY, TEXT, Column, DataType, ForeignKey, TableSchema

__version__ = "0.1.0"

__all__ = [
    "BOOLEAN", "CHAR", "FLOAT", "INT", "MONEY", "TEXT",
    "Catalog", "Column", "Condition", "DataType", "ForeignKey", "ImageContainer",
    "Money", "Predicate", "TableSchema", "VerifyReport",
    "open_database", "parse_image", "verify_directory",
]
