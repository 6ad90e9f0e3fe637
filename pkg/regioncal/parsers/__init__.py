"""Reading the line-delimited JSON files of this package."""

from .jsonl import Record, read_jsonl
from .values import parse_float_vector, parse_int

__all__ = [
    "Record",
    "read_jsonl",
    "parse_float_vector",
    "parse_int",
]
