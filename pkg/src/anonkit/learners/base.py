from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from anonkit.tabular import EncodedMatrix

DECISION_TREE = "decision_tree"
RANDOM_FOREST = "random_forest"
LOGISTIC_REGRESSION = "logistic_regression"
MLP = "mlp"
KINDS = (DECISION_TREE, RANDOM_FOREST, LOGISTIC_REGRESSION, MLP)
CRITERIA = ("gini", "information_gain")
ACTIVATIONS = ("relu", "tanh", "logistic")


class LayoutError(ValueError):
    """Input columns do not match the layout the model was trained on."""


def worker_count() -> int:
    raw = os.environ.get("ANONKIT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class LearnerConfig:
    kind: str
    # trees
    max_depth: int | None = None
    min_samples_leaf: int = 1
    criterion: str = "gini"
    # forest
    tree_count: int = 100
    max_features: str | int | float | None = "sqrt"
    bootstrap: bool = True
    # neural / logistic
    hidden_layers: tuple[int, ...] = (100,)
    activation: str = "relu"
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 200
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown split criterion {self.criterion!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        counts = {
            "min_samples_leaf": self.min_samples_leaf,
            "tree_count": self.tree_count,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
        }
        if self.max_depth is not None:
            counts["max_depth"] = self.max_depth
        for name, value in counts.items():
            if int(value) < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer sizes must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")

    def replace(self, **changes) -> "LearnerConfig":
        doc = asdict(self)
        doc.update(changes)
        return LearnerConfig(**doc)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["hidden_layers"] = list(self.hidden_layers)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "LearnerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown learner option(s): {', '.join(sorted(unknown))}")
        return cls(**doc)


class ClassificationModel:
    """Common surface of the fitted learners.

    Subclasses implement ``_scores(ndarray)``; inputs go through ``_matrix`` so
    a column layout that differs from the training layout is rejected.
    """

    kind: str

    def __init__(self, config: LearnerConfig, n_classes: int, column_map: Sequence):
        self.config = config
        self.n_classes = int(n_classes)
        self.column_map = tuple((f, c) for f, c in column_map)

    @property
    def features(self) -> list[str]:
        return list(dict.fromkeys(f for f, _ in self.column_map))

    def _matrix(self, X) -> np.ndarray:
        if isinstance(X, EncodedMatrix):
            if X.column_map != self.column_map:
                raise LayoutError("column layout differs from the training layout")
            X = X.values
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.column_map):
            raise LayoutError(f"expected {len(self.column_map)} columns, got shape {X.shape}")
        return X

    def predict_scores(self, X) -> np.ndarray:
        return self._scores(self._matrix(X))

    def predict(self, X) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. ties go to the lowest class index
        return np.argmax(self.predict_scores(X), axis=1)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format": "anonkit-model",
            "version": 1,
            "kind": self.kind,
            "config": self.config.to_dict(),
            "n_classes": self.n_classes,
            "column_map": [[f, c] for f, c in self.column_map],
            "params": self._params(),
        }
