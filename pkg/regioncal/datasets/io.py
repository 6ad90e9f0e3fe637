"""Reading and writing datasets.

A dataset file (``*.rds.jsonl``) starts with a header line::

    {"class_count": 8, "feature_dim": 16, "supervision": "full", "version": 1}

followed by one line per image::

    {
      "id": 0,
      "labels": [0, 3],
      "superpixels": [{"id": 0, "pixel_count": 52, "gt": [[3, 52]]}, ...],
      "forest": {"roots": [62, 93], "nodes": [{"id": 0, "children": [], "leaf": 0,
                  "pixel_count": 52}, ...]},
      "features": [[0.1, ...], ...],
      "gt_features": [[3, [0.2, ...]], ...]
    }

The ``gt`` histograms and ``gt_features`` are absent in weakly supervised files.

Externally computed features can be supplied in a sidecar file,
with one record per region or ground-truth region::

    {"image": 0, "region": 5, "features": [...]}
    {"image": 0, "gt_class": 3, "features": [...]}

When a sidecar is used, the ``features`` of the dataset file may be omitted.
"""
from __future__ import annotations

import logging
from collections import defaultdict

import numpy as np

from regioncal.exceptions import (
    DatasetValidationFailed,
    DimensionMismatch,
    ExternalParsingError,
)
from regioncal.forest import RegionForest, RegionNode
from regioncal.output.jsonl import JsonLinesWriter
from regioncal.parsers.jsonl import Record, read_jsonl
from regioncal.parsers.values import parse_float_vector, parse_int, parse_int_list
from regioncal.types import Supervision

from .base import Dataset, ImageRecord, Superpixel, validate_image

logger = logging.getLogger(__name__)

FILE_VERSION = 1

__all__ = ["save_dataset", "load_dataset", "load_features", "apply_features"]


def save_dataset(dataset: Dataset, path):
    with JsonLinesWriter(path) as writer:
        writer.write(
            {
                "class_count": dataset.class_count,
                "feature_dim": dataset.feature_dim,
                "supervision": str(dataset.supervision),
                "version": FILE_VERSION,
            }
        )
        for image in dataset.images:
            writer.write(_image_as_dict(image))

    logger.debug("Wrote %d images to %s", len(dataset.images), path)


def _image_as_dict(image: ImageRecord) -> dict:
    superpixels = []
    for sp in image.superpixels:
        data = {"id": sp.id, "pixel_count": sp.pixel_count}
        if sp.gt_histogram:
            data["gt"] = [[c, n] for c, n in sorted(sp.gt_histogram.items())]
        superpixels.append(data)

    data = {
        "id": image.id,
        "labels": sorted(image.image_labels),
        "superpixels": superpixels,
        "forest": image.forest.as_dict(),
        "features": image.region_features.tolist(),
    }
    if image.gt_region_features:
        data["gt_features"] = [
            [class_id, values.tolist()]
            for class_id, values in sorted(image.gt_region_features.items())
        ]
    return data


def load_dataset(path, feature_path=None) -> Dataset:
    """Read a dataset file, and check all invariants.

    :param feature_path: Optional sidecar file with externally computed features.
    """
    records = read_jsonl(path)
    try:
        header = next(records)
    except StopIteration:
        raise DatasetValidationFailed(str(path), f"Dataset file {path} is empty.") from None

    version = header.get("version", parse_int)
    if version != FILE_VERSION:
        raise header.error(f"unsupported version {version}")
    class_count = header.get("class_count", lambda v: parse_int(v, minimum=1))
    feature_dim = header.get("feature_dim", lambda v: parse_int(v, minimum=1))
    supervision = header.get("supervision", _parse_supervision)

    has_sidecar = feature_path is not None
    images = []
    locators = []
    for record in records:
        image = _parse_image(record, feature_dim, features_required=not has_sidecar)
        if image.id != len(images):
            raise record.error(f"image id {image.id} is out of order, expected {len(images)}")
        images.append(image)
        locators.append(record.locator)

    if has_sidecar:
        images = apply_features(images, load_features(feature_path, feature_dim))

    for image, locator in zip(images, locators):
        violations = validate_image(image, class_count, feature_dim, supervision)
        if violations:
            raise DatasetValidationFailed(locator, violations=violations)

    logger.debug("Read %d images from %s", len(images), path)
    return Dataset(
        class_count=class_count,
        feature_dim=feature_dim,
        images=tuple(images),
        supervision=supervision,
    )


def _parse_image(record: Record, feature_dim: int, features_required=True) -> ImageRecord:
    forest = _parse_forest(record)

    rows = record.get("features", _list, default=None)
    if rows is None:
        if features_required:
            raise record.error("missing field 'features'")
        features = np.full((forest.region_count, feature_dim), np.nan)
    elif rows:
        features = np.vstack([_parse_vector(record, "features", row, feature_dim) for row in rows])
    else:
        features = np.zeros((0, feature_dim))

    gt_features = {}
    for pair in record.get("gt_features", _list_of_pairs, default=[]):
        class_id = _parse_in(record, "gt_features", pair[0], parse_int)
        gt_features[class_id] = _parse_vector(record, "gt_features", pair[1], feature_dim)

    return ImageRecord(
        id=record.get("id", parse_int),
        superpixels=_parse_superpixels(record),
        forest=forest,
        region_features=features,
        image_labels=frozenset(record.get("labels", lambda v: parse_int_list(v, minimum=0))),
        gt_region_features=gt_features,
    )


def _parse_superpixels(record: Record) -> tuple[Superpixel, ...]:
    superpixels = []
    for data in record.get("superpixels", _list_of_objects):
        sub = Record(record.path, record.line, data)
        histogram = {}
        for pair in sub.get("gt", _list_of_pairs, default=[]):
            class_id = _parse_in(record, "gt", pair[0], lambda v: parse_int(v, minimum=0))
            count = _parse_in(record, "gt", pair[1], lambda v: parse_int(v, minimum=0))
            if class_id in histogram:
                raise record.error(f"duplicate class {class_id} in superpixel histogram")
            histogram[class_id] = count
        superpixels.append(
            Superpixel(
                id=sub.get("id", parse_int),
                pixel_count=sub.get("pixel_count", parse_int),
                gt_histogram=histogram,
            )
        )
    return tuple(superpixels)


def _parse_forest(record: Record) -> RegionForest:
    forest_data = record.get("forest")
    if not isinstance(forest_data, dict):
        raise record.error("field 'forest' should be an object")
    forest_record = Record(record.path, record.line, forest_data)
    nodes = []
    for data in forest_record.get("nodes", _list_of_objects):
        sub = Record(record.path, record.line, data)
        leaf = sub.get("leaf", default=None)
        nodes.append(
            RegionNode(
                id=sub.get("id", parse_int),
                children=tuple(sub.get("children", parse_int_list, default=[])),
                leaf_link=None if leaf is None else sub.get("leaf", parse_int),
                pixel_count=sub.get("pixel_count", parse_int),
            )
        )
    return RegionForest(nodes=nodes, roots=forest_record.get("roots", parse_int_list))


def load_features(path, feature_dim: int) -> dict[tuple, np.ndarray]:
    """Read a feature sidecar file.

    :returns: Vectors keyed by ``(image, "region", region_id)``
        or ``(image, "gt", class_id)``.
    """
    features = {}
    for record in read_jsonl(path):
        image_id = record.get("image", lambda v: parse_int(v, minimum=0))
        if "region" in record.data:
            key = (image_id, "region", record.get("region", lambda v: parse_int(v, minimum=0)))
        else:
            key = (image_id, "gt", record.get("gt_class", lambda v: parse_int(v, minimum=0)))

        values = record.get("features", parse_float_vector)
        if len(values) != feature_dim:
            raise DimensionMismatch(
                record.locator,
                f"{record.locator}: expected {feature_dim} features, got {len(values)}.",
            )
        if key in features:
            raise record.error(f"duplicate features for {key}")
        features[key] = values
    return features


def apply_features(images, features: dict[tuple, np.ndarray]) -> list[ImageRecord]:
    """Replace the region features of all images by the sidecar values.

    Every region should be present in the sidecar. Ground-truth region features
    are optional; when missing, those positives are skipped during training.
    """
    gt_by_image = defaultdict(dict)
    for key, values in features.items():
        if key[1] == "gt":
            gt_by_image[key[0]][key[2]] = values

    result = []
    used = 0
    for image in images:
        rows = []
        missing = []
        for region_id in range(image.forest.region_count):
            values = features.get((image.id, "region", region_id))
            if values is None:
                missing.append(region_id)
            else:
                rows.append(values)
        if missing:
            raise DatasetValidationFailed(
                f"image {image.id}",
                f"Feature file has no features for image {image.id}, regions {missing}.",
            )
        gt_features = gt_by_image.get(image.id, {})
        used += len(rows) + len(gt_features)
        region_features = np.vstack(rows) if rows else np.zeros_like(image.region_features)
        result.append(
            ImageRecord(
                id=image.id,
                superpixels=image.superpixels,
                forest=image.forest,
                region_features=region_features,
                image_labels=image.image_labels,
                gt_region_features=gt_features,
            )
        )

    if used != len(features):
        logger.warning("Feature file has %d records for unknown regions.", len(features) - used)
    return result


def _parse_vector(record: Record, field: str, raw_value, length: int) -> np.ndarray:
    return _parse_in(record, field, raw_value, lambda v: parse_float_vector(v, length))


def _parse_in(record: Record, field: str, raw_value, parser):
    try:
        return parser(raw_value)
    except ExternalParsingError as e:
        raise record.error(f"field '{field}': {e}") from e


def _parse_supervision(raw_value) -> Supervision:
    try:
        return Supervision(raw_value)
    except ValueError:
        choices = ", ".join(member.value for member in Supervision)
        raise ExternalParsingError(f"Expected one of {choices}, got {raw_value!r}") from None


def _list_of_objects(raw_value):
    if not isinstance(raw_value, list) or not all(isinstance(v, dict) for v in raw_value):
        raise ExternalParsingError("Expected a list of objects")
    return raw_value


def _list(raw_value):
    if not isinstance(raw_value, list):
        raise ExternalParsingError("Expected a list")
    return raw_value


def _list_of_pairs(raw_value):
    if not isinstance(raw_value, list) or not all(
        isinstance(v, list) and len(v) == 2 for v in raw_value
    ):
        raise ExternalParsingError("Expected a list of [key, value] pairs")
    return raw_value
