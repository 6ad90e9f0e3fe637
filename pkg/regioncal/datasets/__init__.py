"""Dataset model, synthetic generation and file formats."""

from .base import (
    Dataset,
    ImageRecord,
    Superpixel,
    class_pixel_counts,
    iou,
    to_weak,
    validate_image,
)
from .io import load_dataset, load_features, save_dataset
from .synthetic import SyntheticConfig, class_frequencies, generate_synthetic

__all__ = [
    "Dataset",
    "ImageRecord",
    "Superpixel",
    "SyntheticConfig",
    "class_frequencies",
    "class_pixel_counts",
    "generate_synthetic",
    "iou",
    "load_dataset",
    "load_features",
    "save_dataset",
    "to_weak",
    "validate_image",
]
