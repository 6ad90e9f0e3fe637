"""Model files: one JSON line per class, ``{"class_id": 0, "weights": [...]}``.

The last weight is the bias. Untrainable classes are written with ``"weights": null``.
"""
from __future__ import annotations

from typing import Sequence

from regioncal.exceptions import DimensionMismatch
from regioncal.output.jsonl import write_jsonl
from regioncal.parsers.jsonl import read_jsonl
from regioncal.parsers.values import parse_float_vector, parse_int

from .training import LinearModel


def save_models(models: Sequence[LinearModel], path):
    write_jsonl(
        path,
        (
            {
                "class_id": model.class_id,
                "weights": None if model.weights is None else model.weights.tolist(),
            }
            for model in models
        ),
    )


def load_models(path) -> list[LinearModel]:
    models = []
    for record in read_jsonl(path):
        class_id = record.get("class_id", lambda v: parse_int(v, minimum=0))
        if class_id != len(models):
            raise record.error(f"class id {class_id} is out of order, expected {len(models)}")
        weights = record.get("weights")
        if weights is not None:
            weights = record.get("weights", parse_float_vector)
            if len(weights) < 2:
                raise record.error("a model needs at least one feature weight and a bias")
        models.append(LinearModel(class_id, weights))

    dims = {model.feature_dim for model in models if model.trainable}
    if len(dims) > 1:
        raise DimensionMismatch(str(path), f"Models in {path} have different dimensions.")
    return models
