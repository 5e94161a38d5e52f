"""Self-contained classifiers: CART tree, random forest, logistic regression, MLP."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from anonkit.learners.base import (
    DECISION_TREE,
    KINDS,
    LOGISTIC_REGRESSION,
    MLP,
    RANDOM_FOREST,
    ClassificationModel,
    LayoutError,
    LearnerConfig,
    worker_count,
)
from anonkit.learners.features import information_gain, select_features
from anonkit.learners.forest import RandomForest
from anonkit.learners.neural import NeuralNet
from anonkit.learners.tree import DecisionTree, TreeStructure, grow_tree
from anonkit.tabular import Dataset, EncodedMatrix, one_hot_encode

_CLASSES = {
    DECISION_TREE: DecisionTree,
    RANDOM_FOREST: RandomForest,
    LOGISTIC_REGRESSION: NeuralNet,
    MLP: NeuralNet,
}

__all__ = [
    "ClassificationModel",
    "DecisionTree",
    "KINDS",
    "LayoutError",
    "LearnerConfig",
    "NeuralNet",
    "RandomForest",
    "TreeStructure",
    "accuracy",
    "encode_for",
    "fit",
    "grow_tree",
    "information_gain",
    "load_model",
    "model_from_dict",
    "predict",
    "predict_scores",
    "save_model",
    "select_features",
    "worker_count",
]


def fit(config: LearnerConfig, X, y, n_classes: int | None = None) -> ClassificationModel:
    """Train a model of ``config.kind``.

    ``X`` is an EncodedMatrix (its column map becomes the model's input layout)
    or a plain 2-D array.  ``n_classes`` defaults to ``max(y) + 1``.
    """
    if isinstance(X, EncodedMatrix):
        column_map, values = X.column_map, X.values
    else:
        values = np.asarray(X, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("X must be two-dimensional")
        column_map = tuple((f"x{j}", None) for j in range(values.shape[1]))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if values.shape[0] == 0:
        raise ValueError("cannot fit on an empty matrix")
    if values.shape[0] != y.shape[0]:
        raise ValueError(f"X has {values.shape[0]} rows but y has {y.shape[0]}")
    if not np.all(np.isfinite(values)):
        raise ValueError("X holds non-finite values")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("class index out of range")
    return _CLASSES[config.kind].fit(config, values, y, n_classes, column_map)


def predict(model: ClassificationModel, X) -> np.ndarray:
    return model.predict(X)


def predict_scores(model: ClassificationModel, X) -> np.ndarray:
    return model.predict_scores(X)


def encode_for(model: ClassificationModel, data: Dataset) -> EncodedMatrix:
    """Encode ``data`` with the same feature subset the model was trained on."""
    return one_hot_encode(data, model.features)


def accuracy(model, data: Dataset) -> float:
    if len(data) == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    return float(np.mean(model.predict(encode_for(model, data)) == data.labels))


def model_from_dict(doc: dict) -> ClassificationModel:
    if doc.get("format") != "anonkit-model" or doc.get("version") != 1:
        raise ValueError("not an anonkit model document (format/version mismatch)")
    config = LearnerConfig.from_dict(doc["config"])
    column_map = [tuple(c) for c in doc["column_map"]]
    return _CLASSES[doc["kind"]]._from_params(config, doc["n_classes"], column_map, doc["params"])


def save_model(model: ClassificationModel, path: str | Path) -> None:
    # json writes floats with the shortest repr that round-trips exactly
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ClassificationModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
