"""Line-delimited JSON writing.

The records are encoded by orjson, which writes floats in their shortest
round-trip form. Reading a file back gives bit-identical float64 values,
and writing the same data twice gives byte-identical files.
"""
from __future__ import annotations

import io
from pathlib import Path

import orjson

JSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY


def dumps_line(record) -> bytes:
    return orjson.dumps(record, option=JSON_OPTIONS) + b"\n"


class JsonLinesWriter:
    """Write records to a file, one JSON object per line.

    The encoded lines are collected in memory, and written in chunks
    of at least ``chunk_size`` bytes. They go to a ``.partial`` file next to
    ``path``, which replaces ``path`` once the block completes. When the block
    raises, the partial file is removed and ``path`` is left as it was. Usage::

        with JsonLinesWriter(path) as writer:
            writer.write({...})
    """

    def __init__(self, path, chunk_size=65536):
        self.path = Path(path)
        self.chunk_size = chunk_size
        self.pending = io.BytesIO()
        self.file = None
        self.count = 0

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.file = self.partial_path.open("wb")
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        try:
            if exc_type is None:
                self._flush()
        finally:
            self.file.close()
            self.file = None

        if exc_type is None:
            self.partial_path.replace(self.path)
        else:
            self.partial_path.unlink(missing_ok=True)

    @property
    def partial_path(self) -> Path:
        return self.path.with_name(self.path.name + ".partial")

    def write(self, record: dict):
        self.pending.write(dumps_line(record))
        self.count += 1

        # tell() is the size, as the buffer is only appended to.
        if self.pending.tell() >= self.chunk_size:
            self._flush()

    def _flush(self):
        self.file.write(self.pending.getvalue())
        self.pending.seek(0)
        self.pending.truncate(0)


def write_jsonl(path, records) -> int:
    """Write all records to a file, returns the number of lines."""
    with JsonLinesWriter(path) as writer:
        for record in records:
            writer.write(record)
    return writer.count
