"""Exceptions raised by the training, calibration and file handling code.

Every exception that is caused by external input (files, flags) derives from
:class:`RegionCalException`. The command line tool reports these as a single
JSON line on standard error, using the ``kind`` field as machine-readable code.
"""
from __future__ import annotations

import orjson


class ExternalParsingError(ValueError):
    """Raise a ValueError for a parsing problem."""


class RegionCalException(Exception):
    """Base class for all reportable errors in this package."""

    kind = None
    exit_code = 1
    text_template = None

    def __init__(self, locator, text=None, kind=None):
        text = text or self.text_template.format(kind=self.kind, locator=locator)
        super().__init__(text)
        self.locator = locator
        self.text = text
        self.kind = kind or self.kind

    def as_dict(self) -> dict:
        return {"kind": self.kind, "locator": str(self.locator), "message": self.text}

    def as_json(self) -> bytes:
        """Render the error as a single JSON line."""
        return orjson.dumps(self.as_dict())


class InvalidParameterValue(RegionCalException):
    """Unsupported value for a flag or configuration field."""

    kind = "usage_error"
    exit_code = 2
    text_template = "Invalid value for '{locator}' parameter."


class DatasetParsingFailed(RegionCalException):
    """A file could not be parsed. The locator names the offending record."""

    kind = "parse_error"
    text_template = "Unable to parse {locator}."


class DatasetValidationFailed(RegionCalException):
    """The file parsed, but the data violates the dataset invariants."""

    kind = "validation_error"
    text_template = "Invalid data in {locator}."

    def __init__(self, locator, text=None, violations=None):
        self.violations = list(violations or ())
        if text is None and self.violations:
            text = f"Invalid data in {locator}: " + "; ".join(map(str, self.violations))
        super().__init__(locator, text)

    def as_dict(self) -> dict:
        data = super().as_dict()
        data["violations"] = [str(v) for v in self.violations]
        return data


class UnsupportedSupervision(RegionCalException):
    """The operation needs another kind of supervision (e.g. pixel-level ground truth)."""

    kind = "unsupported_supervision"
    text_template = "Operation '{locator}' is not supported for this supervision."


class UndefinedRatio(RegionCalException):
    """A ratio is requested for which the denominator is zero."""

    kind = "undefined_ratio"
    text_template = "The ratio '{locator}' is undefined."


class UnknownSuperpixel(RegionCalException):
    kind = "not_found"
    text_template = "Superpixel {locator} does not exist in this image."


class TrainingFailed(RegionCalException):
    """The SVM can't be trained with the given samples."""

    kind = "training_error"
    text_template = "Unable to train the classifier for {locator}."


class DimensionMismatch(RegionCalException):
    """Models, datasets and calibration files don't describe the same problem."""

    kind = "dimension_mismatch"
    text_template = "Dimensions of '{locator}' don't match."


class MissingInput(RegionCalException):
    kind = "missing_input"
    text_template = "Missing required input '{locator}'."


class OutputFailed(RegionCalException):
    kind = "io_error"
    text_template = "Unable to write {locator}."


class OracleMismatch(RegionCalException):
    """The fast labeling differs from the brute-force labeling."""

    kind = "oracle_mismatch"
    text_template = "The labeling of {locator} differs from the brute-force labeling."
