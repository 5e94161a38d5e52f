import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonkit.presets import QI_PRESETS
from anonkit.tabular import (
    DataError,
    Dataset,
    FeatureSpec,
    QuasiIdentifierSet,
    Schema,
    SchemaError,
    load_csv,
    load_schema,
    one_hot_encode,
    split,
    split_sizes,
    subsample,
    write_csv,
)
from conftest import ADULT_CSV, ADULT_SCHEMA, adult, random_dataset

SMALL_SCHEMA = {
    "features": [
        {"name": "age", "kind": "numeric"},
        {"name": "workclass", "kind": "categorical", "categories": ["Private", "State-gov", "Self-emp", "Federal-gov",
                                                                     "Local-gov", "Never-worked", "Without-pay", "Other"]},
    ],
    "label": "income",
    "label_classes": ["<=50K", ">50K"],
}


@pytest.fixture
def small(tmp_path):
    schema_path = tmp_path / "s.json"
    schema_path.write_text(json.dumps(SMALL_SCHEMA))
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("age,workclass,income\n39,State-gov,<=50K\n50,Private,>50K\n28.5,Local-gov,<=50K\n")
    return schema_path, csv_path


def test_load_schema_small(small):
    schema = load_schema(small[0])
    assert schema.names == ["age", "workclass"]
    assert schema.n_classes == 2
    assert schema.feature("workclass").is_categorical


def test_adult_schema_shape():
    schema = load_schema(ADULT_SCHEMA)
    assert len(schema.features) == 12
    assert sum(f.is_categorical for f in schema.features) == 7
    assert schema.label == "income"
    assert schema.label_classes == ("<=50K", ">50K")


def test_schema_rejects_label_as_feature(tmp_path):
    doc = dict(SMALL_SCHEMA, features=SMALL_SCHEMA["features"] + [{"name": "income", "kind": "numeric"}])
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match="income"):
        load_schema(p)


def test_schema_rejects_duplicates_and_bad_json(tmp_path):
    doc = dict(SMALL_SCHEMA, features=[{"name": "a", "kind": "numeric"}, {"name": "a", "kind": "numeric"}])
    p = tmp_path / "dup.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match="duplicate"):
        load_schema(p)
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_schema(p)
    with pytest.raises(SchemaError):
        FeatureSpec("c", "categorical", ())


def test_load_csv_small(small):
    data = load_csv(small[1], load_schema(small[0]))
    assert len(data) == 3
    assert data.row_ids.tolist() == [0, 1, 2]
    assert data.values.tolist() == [[39.0, 1.0], [50.0, 0.0], [28.5, 4.0]]
    assert data.labels.tolist() == [0, 1, 0]


def test_load_csv_unknown_category_names_row_and_column(small, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("age,workclass,income\n39,State-gov,<=50K\n40,Astronaut,>50K\n")
    with pytest.raises(DataError, match=r"row 3.*workclass.*Astronaut"):
        load_csv(bad, load_schema(small[0]))


@pytest.mark.parametrize(
    "body, message",
    [
        ("age,income\n1,<=50K\n", "missing column"),
        ("age,workclass,income\nabc,Private,<=50K\n", "not a number"),
        ("", "empty file"),
        ("age,workclass,income\n1,Private,rich\n", "unknown class"),
    ],
)
def test_load_csv_errors(small, tmp_path, body, message):
    p = tmp_path / "x.csv"
    p.write_text(body)
    with pytest.raises(DataError, match=message):
        load_csv(p, load_schema(small[0]))


def test_load_csv_drops_rows_with_missing_values(small, tmp_path, caplog):
    p = tmp_path / "m.csv"
    p.write_text("age,workclass,income\n39,,<=50K\n50,Private,>50K\n")
    data = load_csv(p, load_schema(small[0]))
    assert len(data) == 1
    assert "rejected 1 row" in caplog.text


def test_full_adult_extract_row_count():
    assert len(adult()) == 48842


def test_split_sizes_small():
    assert split_sizes(10, (0.4, 0.4, 0.2)) == [4, 4, 2]


def test_split_sizes_adult():
    # floor(0.4*48842)=19536 twice, floor(0.2*48842)=9768, remainder 2 goes to the first part
    assert split_sizes(48842, (0.4, 0.4, 0.2)) == [19538, 19536, 9768]
    assert [len(p) for p in split(adult(), (0.4, 0.4, 0.2), 0)] == [19538, 19536, 9768]


def test_split_deterministic_and_disjoint():
    data, _ = random_dataset(0, n=10)
    a = split(data, (0.4, 0.4, 0.2), 7)
    b = split(data, (0.4, 0.4, 0.2), 7)
    assert [len(p) for p in a] == [4, 4, 2]
    assert all(x.equals(y) for x, y in zip(a, b))
    ids = np.concatenate([p.row_ids for p in a])
    assert sorted(ids.tolist()) == list(range(10))


def test_split_errors():
    data, _ = random_dataset(0, n=3)
    with pytest.raises(ValueError, match="empty"):
        split(data, (0.5, 0.3, 0.2), 0)
    with pytest.raises(ValueError, match="sum"):
        split(data, (0.5, 0.5, 0.5), 0)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 300),
    cuts=st.tuples(st.integers(0, 100), st.integers(0, 100)).map(sorted),
    seed=st.integers(0, 2**32 - 1),
)
def test_split_is_partition(n, cuts, seed):
    a, b = cuts
    fractions = (a / 100, (b - a) / 100, 1 - b / 100)
    data, _ = random_dataset(seed % 1000, n=n, n_qi=2)
    try:
        parts = split(data, fractions, seed)
    except ValueError:
        # only allowed when a part with a positive fraction would be empty
        assert any(f > 0 and s == 0 for f, s in zip(fractions, split_sizes(n, fractions)))
        return
    ids = [set(p.row_ids.tolist()) for p in parts]
    assert set().union(*ids) == set(range(n))
    assert sum(len(s) for s in ids) == n
    assert [len(p) for p in parts] == split_sizes(n, fractions)


def test_one_hot_single_categorical():
    schema = Schema((FeatureSpec("c", "categorical", ("a", "b", "c")),), "y", ("0", "1"))
    data = Dataset(schema, [[1.0]], [0], [0])
    enc = one_hot_encode(data)
    assert enc.values.tolist() == [[0.0, 1.0, 0.0]]
    assert enc.column_map == (("c", "a"), ("c", "b"), ("c", "c"))


def test_one_hot_numeric_plus_categorical():
    schema = Schema((FeatureSpec("age", "numeric"), FeatureSpec("sex", "categorical", ("F", "M"))), "y", ("0", "1"))
    enc = one_hot_encode(Dataset(schema, [[39.0, 1.0]], [0], [0]))
    assert enc.values.tolist() == [[39.0, 0.0, 1.0]]


def test_one_hot_adult8_column_count():
    doc = json.loads(ADULT_SCHEMA.read_text())
    by_name = {f["name"]: f for f in doc["features"]}
    expected = sum(len(by_name[n].get("categories", [None])) for n in QI_PRESETS["adult8"])
    # 1 numeric + 9 + 7 + 15 + 6 + 5 + 2 + 42 categories
    assert expected == 87
    assert one_hot_encode(adult().take(range(10)), QI_PRESETS["adult8"]).shape == (10, 87)


def test_one_hot_rejects_empty():
    data, _ = random_dataset(1, n=5)
    with pytest.raises(ValueError):
        one_hot_encode(data, [])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_encode_decode_round_trip(seed):
    data, qi = random_dataset(seed, n=60)
    enc = one_hot_encode(data, qi)
    decoded = enc.decode(data.schema)
    for name in qi:
        assert np.array_equal(decoded[name], data.column(name))
    for feat in {f for f, c in enc.column_map if c is not None}:
        cols = [i for i, (f, _) in enumerate(enc.column_map) if f == feat]
        assert np.all(enc.values[:, cols].sum(axis=1) == 1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_csv_round_trip_is_identity(seed, tmp_path_factory):
    data, _ = random_dataset(seed, n=40)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(data, path)
    assert load_csv(path, data.schema).equals(data)


def test_qi_set_validation():
    schema = adult().schema
    qi = QuasiIdentifierSet.of(schema, ["sex", "age"])
    assert qi.names == ("age", "sex")
    with pytest.raises(SchemaError):
        QuasiIdentifierSet.of(schema, [])
    with pytest.raises(SchemaError):
        QuasiIdentifierSet.of(schema, ["income"])
    with pytest.raises(SchemaError):
        QuasiIdentifierSet.of(schema, ["height"])


def test_dataset_is_immutable_and_validated():
    data, _ = random_dataset(2, n=5)
    with pytest.raises(ValueError):
        data.values[0, 0] = 1.0
    with pytest.raises(DataError):
        Dataset(data.schema, data.values, data.labels, [0, 0, 1, 2, 3])
    with pytest.raises(DataError):
        Dataset(data.schema, data.values, data.labels + 5, data.row_ids)


def test_subsample_seeded():
    data = adult()
    a, b = subsample(data, 100, 3), subsample(data, 100, 3)
    assert a.equals(b) and len(a) == 100
    assert subsample(a, 500, 0) is a
