"""Line-delimited JSON reading.

Every line holds a single JSON object. Errors are reported with the file name
and line number, so a broken record can be found in large files.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterator, TypeVar

import orjson

from regioncal.exceptions import DatasetParsingFailed, ExternalParsingError, MissingInput

T = TypeVar("T")

NOT_SET = object()


@dataclass(frozen=True)
class Record:
    """A single decoded line, with the context to report errors."""

    path: str
    line: int
    data: dict

    @property
    def locator(self) -> str:
        return f"{self.path}:{self.line}"

    def get(self, key: str, parser: Callable[[Any], T] | None = None, default=NOT_SET) -> T:
        """Read a field, optionally converting it with one of the ``parsers.values`` functions."""
        try:
            raw_value = self.data[key]
        except KeyError:
            if default is not NOT_SET:
                return default
            raise self.error(f"missing field '{key}'") from None

        if parser is None:
            return raw_value
        try:
            return parser(raw_value)
        except ExternalParsingError as e:
            raise self.error(f"field '{key}': {e}") from e

    def error(self, message: str) -> DatasetParsingFailed:
        return DatasetParsingFailed(self.locator, f"Unable to parse {self.locator}: {message}")


def read_jsonl(path) -> Iterator[Record]:
    """Decode all lines of a file. Blank lines are skipped."""
    path = Path(path)
    try:
        file = path.open("rb")
    except FileNotFoundError:
        raise MissingInput(str(path), f"File not found: {path}") from None

    with file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            locator = f"{path}:{line_number}"
            try:
                data = orjson.loads(line)
            except orjson.JSONDecodeError as e:
                raise DatasetParsingFailed(
                    locator, f"Unable to parse {locator}: invalid JSON ({e})"
                ) from None
            if not isinstance(data, dict):
                raise DatasetParsingFailed(
                    locator, f"Unable to parse {locator}: expected a JSON object"
                )
            yield Record(str(path), line_number, data)
