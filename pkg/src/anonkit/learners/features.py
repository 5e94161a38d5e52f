from __future__ import annotations

import numpy as np

from anonkit.tabular import EncodedMatrix

NUMERIC_BINS = 10


def entropy(labels: np.ndarray) -> float:
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def information_gain(codes: np.ndarray, labels: np.ndarray) -> float:
    """H(y) - H(y | codes) for a discrete feature."""
    gain = entropy(labels)
    n = len(labels)
    for value in np.unique(codes):
        mask = codes == value
        gain -= mask.sum() / n * entropy(labels[mask])
    return gain


def feature_codes(X: EncodedMatrix, name: str, bins: int = NUMERIC_BINS) -> np.ndarray:
    """Discrete codes for one source feature of an encoded matrix.

    A one-hot group maps to the index of its hot column.  A numeric column with
    more than ``bins`` distinct values is cut into equal-frequency bins.
    """
    cols = [c for c, (f, _) in enumerate(X.column_map) if f == name]
    if not cols:
        raise ValueError(f"feature {name!r} is not in the matrix")
    block = X.values[:, cols]
    if X.column_map[cols[0]][1] is not None:
        return np.argmax(block, axis=1)
    col = block[:, 0]
    if np.unique(col).size <= bins:
        return col
    edges = np.unique(np.quantile(col, np.arange(1, bins) / bins, method="lower"))
    return np.searchsorted(edges, col, side="left")


def select_features(X: EncodedMatrix, y, m: int) -> list[str]:
    """Top-``m`` source features by information gain of ``y`` on each feature
    alone; equal gains keep column order."""
    names = X.features
    if not 1 <= m <= len(names):
        raise ValueError(f"m must be between 1 and {len(names)}, got {m}")
    y = np.asarray(y)
    gains = [information_gain(feature_codes(X, n), y) for n in names]
    order = sorted(range(len(names)), key=lambda i: (-gains[i], i))
    return [names[i] for i in order[:m]]
