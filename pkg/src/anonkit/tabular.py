"""Schema-typed tabular data: loading, CSV round trips, splitting, one-hot encoding.

Values are held in a float matrix with one column per schema feature.  Numeric
features store the raw value, categorical features store the category index
(exact in float64).  Labels are class indices into ``Schema.label_classes``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class SchemaError(ValueError):
    pass


class DataError(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"categorical feature {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"categorical feature {self.name!r} repeats a category")
        elif self.categories:
            raise SchemaError(f"numeric feature {self.name!r} must not list categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureSpec, ...]
    label: str
    label_classes: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = [f.name for f in self.features]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate feature name(s): {', '.join(dupes)}")
        if self.label in names:
            raise SchemaError(f"label {self.label!r} is also listed as a feature")
        if not self.label_classes:
            raise SchemaError("label_classes is empty")
        if len(set(self.label_classes)) != len(self.label_classes):
            raise SchemaError("label_classes repeats a class")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def n_classes(self) -> int:
        return len(self.label_classes)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def feature(self, name: str) -> FeatureSpec:
        return self.features[self.index(name)]

    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind}
            if f.is_categorical:
                d["categories"] = list(f.categories)
            feats.append(d)
        return {"features": feats, "label": self.label, "label_classes": list(self.label_classes)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Schema":
        try:
            features = tuple(
                FeatureSpec(f["name"], f["kind"], tuple(f.get("categories", ()))) for f in doc["features"]
            )
            return cls(features, doc["label"], tuple(doc["label_classes"]))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc


@dataclass(frozen=True)
class Dataset:
    """Immutable table.  ``values`` is (n, n_features), ``labels`` and ``row_ids`` are (n,)."""

    schema: Schema
    values: np.ndarray
    labels: np.ndarray
    row_ids: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1, len(self.schema.features))
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        row_ids = np.array(self.row_ids, dtype=np.int64, copy=True).reshape(-1)
        n = values.shape[0]
        if labels.shape[0] != n or row_ids.shape[0] != n:
            raise DataError("values, labels and row_ids must have the same length")
        if n and (labels.min() < 0 or labels.max() >= self.schema.n_classes):
            raise DataError("label index out of range")
        if len(np.unique(row_ids)) != n:
            raise DataError("row_ids are not unique")
        for j, f in enumerate(self.schema.features):
            col = values[:, j]
            if not np.all(np.isfinite(col)):
                raise DataError(f"column {f.name!r} holds non-finite values")
            if f.is_categorical and n:
                if np.any(col != np.round(col)) or col.min() < 0 or col.max() >= len(f.categories):
                    raise DataError(f"column {f.name!r} holds an invalid category index")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "row_ids", _frozen(row_ids))

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index(name)]

    def take(self, positions: Sequence[int] | np.ndarray) -> "Dataset":
        pos = np.asarray(positions, dtype=np.int64)
        return Dataset(self.schema, self.values[pos], self.labels[pos], self.row_ids[pos])

    def with_values(self, values: np.ndarray) -> "Dataset":
        return Dataset(self.schema, values, self.labels, self.row_ids)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.values, labels, self.row_ids)

    def with_row_ids(self, row_ids: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.values, self.labels, row_ids)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.row_ids, other.row_ids)
        )

    def format_value(self, j: int, value: float) -> str:
        f = self.schema.features[j]
        if f.is_categorical:
            return f.categories[int(value)]
        return format_number(value)


@dataclass(frozen=True)
class QuasiIdentifierSet:
    """QI feature names, kept in schema order."""

    names: tuple[str, ...]

    @classmethod
    def of(cls, schema: Schema, names: Iterable[str]) -> "QuasiIdentifierSet":
        names = list(dict.fromkeys(names))
        if not names:
            raise SchemaError("quasi-identifier set is empty")
        for n in names:
            if n == schema.label:
                raise SchemaError(f"label {n!r} cannot be a quasi-identifier")
            schema.index(n)
        return cls(tuple(sorted(names, key=schema.index)))

    def indices(self, schema: Schema) -> list[int]:
        return [schema.index(n) for n in self.names]


@dataclass(frozen=True)
class EncodedMatrix:
    """Dense matrix with ``column_map[c] = (feature, category or None)``."""

    values: np.ndarray
    column_map: tuple[tuple[str, str | None], ...]
    row_ids: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=np.float64)))
        object.__setattr__(self, "row_ids", _frozen(np.asarray(self.row_ids, dtype=np.int64)))
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_map):
            raise DataError("encoded matrix width does not match its column map")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def features(self) -> list[str]:
        return list(dict.fromkeys(f for f, _ in self.column_map))

    def take(self, positions) -> "EncodedMatrix":
        pos = np.asarray(positions, dtype=np.int64)
        return EncodedMatrix(self.values[pos], self.column_map, self.row_ids[pos])

    def decode(self, schema: Schema) -> dict[str, np.ndarray]:
        """Invert the encoding back to per-feature raw values (category indices for categoricals)."""
        out: dict[str, np.ndarray] = {}
        for name in self.features:
            cols = [c for c, (f, _) in enumerate(self.column_map) if f == name]
            spec = schema.feature(name)
            if spec.is_categorical:
                cats = [self.column_map[c][1] for c in cols]
                pos = np.argmax(self.values[:, cols], axis=1)
                out[name] = np.array([spec.categories.index(cats[p]) for p in pos], dtype=np.float64)
            else:
                out[name] = self.values[:, cols[0]].copy()
        return out


def format_number(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def load_schema(path: str | Path) -> Schema:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: schema must be a JSON object")
    return Schema.from_dict(doc)


def load_csv(path: str | Path, schema: Schema) -> Dataset:
    """Read a headed CSV into a Dataset with ``row_ids = 0..n-1`` in file order.

    Rows with an empty field are dropped and their count is logged; every other
    defect (missing column, bad number, unknown category or class) raises.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        expected = schema.names + [schema.label]
        missing = [c for c in expected if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        pos = [header.index(c) for c in expected]
        lookups = [
            {c: i for i, c in enumerate(f.categories)} if f.is_categorical else None for f in schema.features
        ]
        classes = {c: i for i, c in enumerate(schema.label_classes)}
        values, labels, skipped = [], [], 0
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"{path}: row {line_no} has {len(record)} fields, expected {len(header)}")
            fields = [record[p] for p in pos]
            if any(v == "" for v in fields):
                skipped += 1
                continue
            row = []
            for j, (f, raw) in enumerate(zip(schema.features, fields)):
                if lookups[j] is not None:
                    try:
                        row.append(lookups[j][raw])
                    except KeyError:
                        raise DataError(f"{path}: row {line_no}, column {f.name!r}: unknown category {raw!r}") from None
                else:
                    try:
                        v = float(raw)
                    except ValueError:
                        raise DataError(f"{path}: row {line_no}, column {f.name!r}: not a number {raw!r}") from None
                    if not math.isfinite(v):
                        raise DataError(f"{path}: row {line_no}, column {f.name!r}: non-finite value {raw!r}")
                    row.append(v)
            try:
                labels.append(classes[fields[-1]])
            except KeyError:
                raise DataError(f"{path}: row {line_no}, column {schema.label!r}: unknown class {fields[-1]!r}") from None
            values.append(row)
    if skipped:
        logger.warning("%s: rejected %d row(s) with missing values", path, skipped)
    if not values:
        raise DataError(f"{path}: no data rows")
    n = len(values)
    return Dataset(schema, np.array(values, dtype=np.float64), np.array(labels), np.arange(n))


def write_csv(data: Dataset, path: str | Path) -> None:
    """Serialize in the load_csv format; numbers use the shortest exact repr."""
    schema = data.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.names + [schema.label])
        for row, label in zip(data.values, data.labels):
            writer.writerow(
                [data.format_value(j, v) for j, v in enumerate(row)] + [schema.label_classes[label]]
            )


def split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    # 1e-9 guards against products such as 0.29 * 100 = 28.999999999999996
    sizes = [math.floor(f * n + 1e-9) for f in fractions]
    sizes[0] += n - sum(sizes)
    return sizes


def split(data: Dataset, fractions: Sequence[float], seed: int) -> tuple[Dataset, ...]:
    """Seeded shuffle of the rows, then consecutive cuts.

    Floor-based sizes; the leftover rows go to the first part.  Each part keeps
    its rows in ascending row_id order.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {sum(fractions)!r}, expected 1")
    n = len(data)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    sizes = split_sizes(n, fractions)
    for i, (f, s) in enumerate(zip(fractions, sizes)):
        if f > 0 and s == 0:
            raise ValueError(f"split {i + 1} with fraction {f} would be empty for {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    parts, start = [], 0
    for s in sizes:
        chunk = perm[start : start + s]
        start += s
        chunk = chunk[np.argsort(data.row_ids[chunk], kind="stable")]
        parts.append(data.take(chunk))
    return tuple(parts)


def subsample(data: Dataset, max_rows: int, seed: int) -> Dataset:
    if len(data) <= max_rows:
        return data
    pos = np.sort(np.random.default_rng(seed).choice(len(data), size=max_rows, replace=False))
    return data.take(pos)


def one_hot_encode(data: Dataset, features: Iterable[str] | None = None) -> EncodedMatrix:
    """Numeric features pass through unscaled; a categorical feature becomes one
    indicator column per schema category.  Columns follow schema order."""
    schema = data.schema
    names = schema.names if features is None else list(features)
    if not names:
        raise ValueError("one_hot_encode needs at least one feature")
    idx = sorted({schema.index(n) for n in names})
    blocks, column_map = [], []
    for j in idx:
        f = schema.features[j]
        col = data.values[:, j]
        if f.is_categorical:
            block = np.zeros((len(data), len(f.categories)))
            block[np.arange(len(data)), col.astype(np.int64)] = 1.0
            blocks.append(block)
            column_map.extend((f.name, c) for c in f.categories)
        else:
            blocks.append(col[:, None])
            column_map.append((f.name, None))
    return EncodedMatrix(np.hstack(blocks), tuple(column_map), data.row_ids)


def project(data: Dataset, features: Iterable[str]) -> Dataset:
    """Keep only ``features`` (in schema order); the label is untouched."""
    schema = data.schema
    idx = sorted({schema.index(n) for n in features})
    sub = Schema(tuple(schema.features[j] for j in idx), schema.label, schema.label_classes)
    return Dataset(sub, data.values[:, idx], data.labels, data.row_ids)
