import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from anonkit.evaluation import verify_k_anonymity
from anonkit.mondrian import mondrian_anonymize, mondrian_partition
from anonkit.tabular import Dataset, FeatureSpec, QuasiIdentifierSet, Schema
from conftest import random_dataset


def table(columns, kinds):
    features = tuple(
        FeatureSpec(f"f{j}", "numeric") if kind is None else FeatureSpec(f"f{j}", "categorical", kind)
        for j, kind in enumerate(kinds)
    )
    schema = Schema(features, "y", ("a", "b"))
    values = np.column_stack(columns).astype(float)
    return Dataset(schema, values, np.zeros(len(values), dtype=int), np.arange(len(values)))


def test_single_numeric_median_split():
    data = table([[1, 2, 3, 4]], [None])
    out = mondrian_anonymize(data, QuasiIdentifierSet.of(data.schema, ["f0"]), 2)
    assert out.values[:, 0].tolist() == [1.5, 1.5, 3.5, 3.5]


def test_k_equal_n_is_one_partition():
    data = table([[1, 5, 9, 2, 7], [0, 1, 1, 2, 1]], [None, ("x", "y", "z")])
    qi = QuasiIdentifierSet.of(data.schema, ["f0", "f1"])
    assert len(mondrian_partition(data, qi, 5)) == 1
    out = mondrian_anonymize(data, qi, 5)
    assert out.values.tolist() == [[5.0, 1.0]] * 5


def test_identical_rows_unchanged():
    data = table([[3, 3, 3, 3], [1, 1, 1, 1]], [None, ("x", "y")])
    qi = QuasiIdentifierSet.of(data.schema, ["f0", "f1"])
    assert mondrian_anonymize(data, qi, 2).equals(data)


def test_categorical_frequency_cut():
    # counts: c2 x3, c0 x2, c1 x1 -> ordered [c2, c0, c1]; cumulative 3 reaches n/2 = 3 at c2,
    # so {c2} goes left and {c0, c1} right; modes are c2 and c0
    data = table([[2, 2, 2, 0, 0, 1]], [("c0", "c1", "c2")])
    out = mondrian_anonymize(data, QuasiIdentifierSet.of(data.schema, ["f0"]), 3)
    assert out.values[:, 0].tolist() == [2, 2, 2, 0, 0, 0]


def test_widest_normalized_range_is_cut_first():
    # f0 spans its whole range in both halves of f1, f1 is binary:
    # both start at normalized width 1, schema order picks f0
    data = table([[0, 1, 2, 3, 0, 1, 2, 3], [0, 0, 0, 0, 1, 1, 1, 1]], [None, None])
    parts = mondrian_partition(data, QuasiIdentifierSet.of(data.schema, ["f0", "f1"]), 4)
    assert sorted(p.member_row_ids.tolist() for p in parts) == [[0, 1, 4, 5], [2, 3, 6, 7]]


def test_too_few_rows():
    data = table([[1, 2]], [None])
    with pytest.raises(ValueError):
        mondrian_anonymize(data, QuasiIdentifierSet.of(data.schema, ["f0"]), 3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), k=st.sampled_from([1, 2, 5, 17, 50]))
def test_mondrian_properties(seed, k):
    rng = np.random.default_rng(seed)
    data, qi_names = random_dataset(seed, n=int(rng.integers(max(k, 50), 500)))
    qi = QuasiIdentifierSet.of(data.schema, qi_names)
    parts = mondrian_partition(data, qi, k)
    out = mondrian_anonymize(data, qi, k)
    cols = qi.indices(data.schema)
    other = [j for j in range(len(data.schema.features)) if j not in cols]
    assert verify_k_anonymity(out, qi, k).passed
    if len(data) <= 200:
        assert oracles.pairwise_k_anonymous(out.values[:, cols].tolist(), k)
    assert np.array_equal(out.values[:, other], data.values[:, other])
    assert np.array_equal(out.labels, data.labels)
    assert sorted(np.concatenate([p.member_row_ids for p in parts]).tolist()) == data.row_ids.tolist()
    for p in parts:
        assert p.size >= k
        for c, j in enumerate(cols):
            f = data.schema.features[j]
            recoded = out.values[p.member_row_ids, j]
            assert np.all(recoded == recoded[0])
            if f.is_categorical:
                assert int(recoded[0]) in p.coverage[f.name]
            else:
                lo, hi = p.coverage[f.name]
                assert lo <= recoded[0] <= hi
