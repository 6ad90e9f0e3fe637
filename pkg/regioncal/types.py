"""Shared type definitions.

Identifiers are plain integers, dense within their scope:

* ``ClassId`` is global for a dataset (``0 .. C-1``).
* ``SuperpixelId`` and ``RegionId`` are local to an image (``0 .. S-1`` and ``0 .. R-1``).
* ``ImageId`` is the image number in the dataset.

A :data:`Labeling` is an integer array indexed by ``SuperpixelId``,
and a :data:`ScoreMatrix` is a float array of shape ``(R, C)``.
"""
from __future__ import annotations

from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from regioncal.exceptions import InvalidParameterValue

__all__ = [
    "ClassId",
    "RegionId",
    "SuperpixelId",
    "ImageId",
    "Labeling",
    "ScoreMatrix",
    "Supervision",
    "LossKind",
    "SampleRef",
]

ClassId = int
RegionId = int
SuperpixelId = int
ImageId = int

#: Per image, the class of every superpixel (index = SuperpixelId).
Labeling = np.ndarray

#: Per image, raw SVM scores ``w_c . x_r``; rows are regions, columns are classes.
ScoreMatrix = np.ndarray


class _ChoiceEnum(Enum):
    """Enum that parses external values with a proper error."""

    @classmethod
    def from_string(cls, value: str, locator: str):
        try:
            return cls(value)
        except ValueError:
            choices = ", ".join(member.value for member in cls)
            raise InvalidParameterValue(
                locator, f"Expected one of {choices} for '{locator}', got '{value}'."
            ) from None

    def __str__(self):
        return self.value


class Supervision(_ChoiceEnum):
    """Which ground truth is available for training."""

    #: Pixel-level ground truth (per-superpixel class histograms).
    FULL = "full"

    #: Image-level label sets only.
    WEAK = "weak"


class LossKind(_ChoiceEnum):
    """The loss that joint calibration minimizes."""

    #: One minus the class-average pixel accuracy.
    FULLY_SUPERVISED = "fs"

    #: Inverse-frequency weighted Hamming distance between image label sets.
    WEAKLY_SUPERVISED = "ws"

    @classmethod
    def for_supervision(cls, supervision: Supervision) -> LossKind:
        if supervision is Supervision.FULL:
            return cls.FULLY_SUPERVISED
        else:
            return cls.WEAKLY_SUPERVISED


class SampleRef(NamedTuple):
    """Reference to a training sample.

    The ``region_id`` is ``None`` for a ground-truth region,
    which isn't a region proposal of the image.
    """

    image_id: ImageId
    region_id: Optional[RegionId]
