from __future__ import annotations

import math

import numpy as np

from regioncal.exceptions import ExternalParsingError


def parse_int(raw_value, minimum: int | None = None) -> int:
    """Check that a decoded JSON value is an integer (booleans are rejected)."""
    if isinstance(raw_value, bool) or not isinstance(raw_value, int):
        raise ExternalParsingError(f"Expected an integer, got {raw_value!r}")
    if minimum is not None and raw_value < minimum:
        raise ExternalParsingError(f"Expected a value >= {minimum}, got {raw_value}")
    return raw_value


def parse_float(raw_value) -> float:
    if isinstance(raw_value, bool) or not isinstance(raw_value, (int, float)):
        raise ExternalParsingError(f"Expected a number, got {raw_value!r}")
    if not math.isfinite(raw_value):
        raise ExternalParsingError(f"Expected a finite number, got {raw_value!r}")
    return float(raw_value)


def parse_float_vector(raw_value, length: int | None = None) -> np.ndarray:
    """Convert a JSON list of numbers to a float64 array."""
    if not isinstance(raw_value, list):
        raise ExternalParsingError(f"Expected a list of numbers, got {type(raw_value).__name__}")
    if length is not None and len(raw_value) != length:
        raise ExternalParsingError(f"Expected {length} values, got {len(raw_value)}")
    return np.array([parse_float(value) for value in raw_value], dtype=np.float64)


def parse_int_list(raw_value, minimum: int | None = None) -> list[int]:
    if not isinstance(raw_value, list):
        raise ExternalParsingError(f"Expected a list of integers, got {raw_value!r}")
    return [parse_int(value, minimum=minimum) for value in raw_value]
