"""Reading and writing calibration files.

A calibration file is a single JSON document::

    {
      "version": 1,
      "method": "jc",
      "loss_kind": "fs",
      "params": [{"class_id": 0, "a": -7.0, "b": 0.0}, ...],
      "initial_loss": 0.41, "final_loss": 0.27, "sweeps": 3,
      "trace": [{"sweep": 1, "class_id": 0, "parameter": "b", "old": 0.0,
                 "new": -3.3333333333333335, "loss": 0.35}, ...]
    }
"""
from __future__ import annotations

from pathlib import Path

import orjson

from regioncal.exceptions import DatasetParsingFailed, ExternalParsingError, MissingInput
from regioncal.parsers.values import parse_float, parse_int
from regioncal.types import LossKind

from .descent import TraceStep
from .joint import CalibrationResult
from .sigmoid import CalibrationParams

FILE_VERSION = 1


def calibration_as_dict(result: CalibrationResult) -> dict:
    return {
        "version": FILE_VERSION,
        "method": result.method,
        "loss_kind": str(result.loss_kind) if result.loss_kind else None,
        "params": result.params.as_list(),
        "initial_loss": result.initial_loss,
        "final_loss": result.final_loss,
        "sweeps": result.sweeps,
        "trace": [step.as_dict() for step in result.trace],
    }


def save_calibration(result: CalibrationResult, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(
        orjson.dumps(calibration_as_dict(result), option=orjson.OPT_INDENT_2) + b"\n"
    )


def load_calibration(path) -> CalibrationResult:
    path = Path(path)
    try:
        data = orjson.loads(path.read_bytes())
    except FileNotFoundError:
        raise MissingInput(str(path), f"File not found: {path}") from None
    except orjson.JSONDecodeError as e:
        raise DatasetParsingFailed(
            str(path), f"Unable to parse {path}: invalid JSON ({e})"
        ) from None

    try:
        return _parse_calibration(data)
    except (ExternalParsingError, KeyError, TypeError, ValueError) as e:
        raise DatasetParsingFailed(str(path), f"Unable to parse {path}: {e!r}") from e


def _parse_calibration(data: dict) -> CalibrationResult:
    if data["version"] != FILE_VERSION:
        raise ExternalParsingError(f"unsupported version {data['version']}")

    entries = sorted(data["params"], key=lambda entry: entry["class_id"])
    class_ids = [parse_int(entry["class_id"]) for entry in entries]
    if class_ids != list(range(len(entries))):
        raise ExternalParsingError("params should list every class id once")

    params = CalibrationParams(
        a=[parse_float(entry["a"]) for entry in entries],
        b=[parse_float(entry["b"]) for entry in entries],
    )
    loss_kind = data.get("loss_kind")
    return CalibrationResult(
        params=params,
        trace=[TraceStep(**step) for step in data.get("trace", [])],
        method=data.get("method", "jc"),
        loss_kind=LossKind(loss_kind) if loss_kind else None,
        initial_loss=data.get("initial_loss"),
        final_loss=data.get("final_loss"),
        sweeps=data.get("sweeps", 0),
    )
