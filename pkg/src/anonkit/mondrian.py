"""Median Mondrian (strict multidimensional partitioning) baseline.

Partitions are recoded to concrete values so the output trains with the same
learners as the accuracy-guided method: numeric QIs take the midpoint of the
partition's range, categorical QIs the partition's modal category.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from anonkit.tabular import Dataset, QuasiIdentifierSet


@dataclass(frozen=True)
class Partition:
    member_row_ids: np.ndarray
    # per QI feature: (min, max) for numeric, sorted category indices for categorical
    coverage: dict

    @property
    def size(self) -> int:
        return len(self.member_row_ids)


def _median_cut(col: np.ndarray) -> np.ndarray | None:
    """Left-side mask for a numeric median split, or None if every row is on one side."""
    mid = (len(col) - 1) // 2
    median = np.partition(col, mid)[mid]
    mask = col <= median
    if mask.all():
        mask = col < median
    if not mask.any() or mask.all():
        return None
    return mask


def _frequency_cut(col: np.ndarray, n_categories: int) -> np.ndarray | None:
    """Order the present categories by count (desc, then index) and cut the
    list where the cumulative count first reaches half the rows."""
    codes = col.astype(np.int64)
    all_counts = np.bincount(codes, minlength=n_categories)
    cats = np.flatnonzero(all_counts)
    if cats.size < 2:
        return None
    counts = all_counts[cats]
    order = np.lexsort((cats, -counts))
    cum = np.cumsum(counts[order])
    cut = int(np.searchsorted(cum, len(col) / 2.0))
    cut = min(cut, cats.size - 2)
    left = np.zeros(n_categories, dtype=bool)
    left[cats[order[: cut + 1]]] = True
    return left[codes]


def mondrian_partition(train: Dataset, qi: QuasiIdentifierSet, k: int) -> list[Partition]:
    """Top-down strict partitioning.

    A partition tries its QI features from the widest normalized range down
    (numeric: range / global range, categorical: distinct count / global
    distinct count; ties keep schema order) and takes the first median cut that
    leaves at least ``k`` rows on each side.  Partitions with no such cut are
    final.
    """
    n = len(train)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"cannot {k}-anonymize {n} rows")
    schema = train.schema
    cols = qi.indices(schema)
    categorical = np.array([schema.features[j].is_categorical for j in cols])
    X = train.values[:, cols]
    num = np.flatnonzero(~categorical)
    cat = np.flatnonzero(categorical)
    # categorical codes shifted into one shared range so a single bincount
    # counts the distinct categories of every column at once
    n_categories = [len(schema.features[j].categories) if schema.features[j].is_categorical else 0 for j in cols]
    sizes = np.array([n_categories[c] for c in cat], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    shifted = X[:, cat].astype(np.int64) + offsets[:-1]
    global_width = np.zeros(len(cols))
    global_width[num] = X[:, num].max(axis=0) - X[:, num].min(axis=0)
    global_width[cat] = _distinct_counts(shifted, offsets)

    final: list[np.ndarray] = []
    stack = [np.arange(n)]
    while stack:
        rows = stack.pop()
        done = True
        if len(rows) >= 2 * k:
            sub = X[rows]
            widths = np.zeros(len(cols))
            # constant columns have no cut and are not tried
            varies = np.zeros(len(cols), dtype=bool)
            if num.size:
                span = sub[:, num].max(axis=0) - sub[:, num].min(axis=0)
                g = global_width[num]
                widths[num] = np.divide(span, g, out=np.zeros_like(span), where=g > 0)
                varies[num] = span > 0
            if cat.size:
                distinct = _distinct_counts(shifted[rows], offsets)
                widths[cat] = distinct / global_width[cat]
                varies[cat] = distinct > 1
            ranked = np.argsort(-widths, kind="stable")
            for c in ranked[varies[ranked]].tolist():
                if categorical[c]:
                    mask = _frequency_cut(sub[:, c], n_categories[c])
                else:
                    mask = _median_cut(sub[:, c])
                if mask is None:
                    continue
                left = int(mask.sum())
                if left >= k and len(rows) - left >= k:
                    stack.append(rows[~mask])
                    stack.append(rows[mask])
                    done = False
                    break
        if done:
            final.append(rows)

    group = np.empty(n, dtype=np.int64)
    for g, rows in enumerate(final):
        group[rows] = g
    lo, hi = _group_ranges(X[:, num], group, len(final))
    present = [
        (
            np.bincount(group * n_categories[c] + X[:, c].astype(np.int64), minlength=len(final) * n_categories[c])
            .reshape(len(final), n_categories[c]) > 0
        ).tolist()
        for c in cat
    ]
    lo, hi = lo.tolist(), hi.tolist()
    slot = {int(c): i for i, c in enumerate(num)} | {int(c): i for i, c in enumerate(cat)}
    names = [schema.features[j].name for j in cols]
    parts = []
    for g, rows in enumerate(final):
        coverage = {}
        for c, name in enumerate(names):
            i = slot[c]
            if categorical[c]:
                coverage[name] = tuple(v for v, seen in enumerate(present[i][g]) if seen)
            else:
                coverage[name] = (lo[g][i], hi[g][i])
        # rows come out of order-preserving masks, so they are ascending
        parts.append(Partition(train.row_ids[rows], coverage))
    return parts


def _group_ranges(values: np.ndarray, group: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group column minima and maxima."""
    lo = np.full((n_groups, values.shape[1]), np.inf)
    hi = np.full((n_groups, values.shape[1]), -np.inf)
    np.minimum.at(lo, group, values)
    np.maximum.at(hi, group, values)
    return lo, hi


def _distinct_counts(shifted: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    if shifted.shape[1] == 0:
        return np.zeros(0)
    present = np.bincount(shifted.ravel(), minlength=int(offsets[-1])) > 0
    return np.add.reduceat(present, offsets[:-1]).astype(float)


def recode(train: Dataset, qi: QuasiIdentifierSet, partitions: list[Partition]) -> Dataset:
    schema = train.schema
    position = {rid: i for i, rid in enumerate(train.row_ids.tolist())}
    group = np.full(len(train), -1, dtype=np.int64)
    for g, part in enumerate(partitions):
        group[[position[r] for r in part.member_row_ids.tolist()]] = g
    if np.any(group < 0):
        raise ValueError("partitions do not cover every row")
    n_groups = len(partitions)
    values = train.values.copy()
    for j in qi.indices(schema):
        col = train.values[:, j]
        f = schema.features[j]
        if f.is_categorical:
            m = len(f.categories)
            counts = np.bincount(group * m + col.astype(np.int64), minlength=n_groups * m).reshape(n_groups, m)
            # argmax: modal category, ties to the lowest index
            values[:, j] = np.argmax(counts, axis=1)[group].astype(float)
        else:
            lo, hi = _group_ranges(col[:, None], group, n_groups)
            values[:, j] = ((lo[:, 0] + hi[:, 0]) / 2.0)[group]
    return train.with_values(values)


def mondrian_anonymize(train: Dataset, qi: QuasiIdentifierSet, k: int) -> Dataset:
    return recode(train, qi, mondrian_partition(train, qi, k))
