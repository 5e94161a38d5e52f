import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from anonkit import evaluation
from anonkit.anonymizer import AnonymizationConfig, anonymize
from anonkit.evaluation import (
    ConfigError,
    VerificationError,
    equivalence_class_stats,
    parse_config,
    plot_rows,
    run_experiment,
    verify_k_anonymity,
    write_plot_data,
    write_reports,
)
from anonkit.tabular import Dataset, FeatureSpec, QuasiIdentifierSet, Schema, load_csv, load_schema
from conftest import ADULT_CSV, ADULT_SCHEMA, FIXTURES, NURSERY_CSV, NURSERY_SCHEMA, random_dataset


def letters(counts: dict):
    cats = tuple(sorted(counts))
    schema = Schema((FeatureSpec("q", "categorical", cats),), "y", ("0",))
    values = [[cats.index(c)] for c, n in counts.items() for _ in range(n)]
    return Dataset(schema, values, [0] * len(values), range(len(values)))


def small_config(**overrides):
    doc = {
        "dataset": str(ADULT_CSV),
        "schema": str(ADULT_SCHEMA),
        "qi_preset": "adult8",
        "ks": [10, 100],
        "methods": ["AG", "mondrian"],
        "learners": ["dt"],
        "seed": 0,
        "subsample": 1500,
    }
    if "seeds" in overrides:
        del doc["seed"]
    doc.update(overrides)
    return doc


def test_verify_examples():
    data = letters({"A": 3, "B": 2})
    ok = verify_k_anonymity(data, ["q"], 2)
    assert ok.passed and ok.min_group_size == 2 and ok.group_count == 2
    bad = verify_k_anonymity(data, ["q"], 3)
    assert not bad.passed
    assert bad.violating_tuples == [(("B",), 2)]
    assert bad.to_dict()["violating_tuples"] == [[["B"], 2]]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), k=st.integers(1, 6))
def test_verify_agrees_with_pairwise_oracle(seed, k):
    rng = np.random.default_rng(seed)
    data, qi = random_dataset(seed, n=int(rng.integers(5, 120)), n_qi=2)
    # coarsen numeric columns so that groups of several rows occur
    values = data.values.copy()
    for j, f in enumerate(data.schema.features):
        if not f.is_categorical:
            values[:, j] = np.floor(values[:, j] / 20)
    data = data.with_values(values)
    cols = QuasiIdentifierSet.of(data.schema, qi).indices(data.schema)
    assert verify_k_anonymity(data, qi, k).passed == oracles.pairwise_k_anonymous(data.values[:, cols].tolist(), k)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_original_data_is_always_1_anonymous(seed):
    data, qi = random_dataset(seed)
    assert verify_k_anonymity(data, qi, 1).passed


def test_verify_needs_qi():
    data, _ = random_dataset(0, n=10)
    with pytest.raises(ValueError):
        verify_k_anonymity(data, [], 2)


def test_class_stats_trivial_cases():
    data, qi = random_dataset(4, n=50)
    labels = np.zeros(50, dtype=int)
    labels[::3] = 1
    out, _ = anonymize(data, labels, AnonymizationConfig(50, QuasiIdentifierSet.of(data.schema, qi)))
    assert equivalence_class_stats(out, qi).to_dict() == {"group_count": 1, "min_size": 50, "mean_size": 50.0, "max_size": 50}
    distinct = Dataset(data.schema, np.column_stack([np.arange(50)] + [data.values[:, j] for j in range(1, data.values.shape[1])]), data.labels, data.row_ids)
    stats = equivalence_class_stats(distinct, [data.schema.names[0]])
    assert (stats.group_count, stats.min_size, stats.max_size) == (50, 1, 1)


def test_class_stats_golden():
    schema = load_schema(FIXTURES / "golden6.schema.json")
    data = load_csv(FIXTURES / "golden6.csv", schema)
    cases = json.loads((FIXTURES / "golden6_expected.json").read_text())["cases"]
    qi = QuasiIdentifierSet.of(schema, ["age", "color"])
    # hand trace: 3 groups of 2, then groups of 4 and 2
    expected = [(3, 2, 2.0, 2), (2, 2, 3.0, 4)]
    for case, want in zip(cases, expected):
        out, _ = anonymize(data, case["predictions"], AnonymizationConfig(2, qi))
        s = equivalence_class_stats(out, qi)
        assert (s.group_count, s.min_size, s.mean_size, s.max_size) == want


def test_config_errors_are_collected():
    doc = {
        "dataset": "missing.csv",
        "schema": str(ADULT_SCHEMA),
        "qi_list": ["age", "height"],
        "ks": [0, 10],
        "methods": ["AG", "hilbert"],
        "learners": ["dt", "svm"],
        "label_source": "guess",
        "fractions": [0.5, 0.5, 0.5],
        "colour": "blue",
    }
    with pytest.raises(ConfigError) as err:
        parse_config(doc)
    text = "\n".join(err.value.problems)
    for fragment in ("colour", "dataset file not found", "height", "'ks'", "'methods'", "svm", "label_source", "fractions"):
        assert fragment in text
    assert len(err.value.problems) == 8


def test_config_qi_exclusivity_and_paths(tmp_path):
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(small_config(qi_list=["age"]))
    cfg_path = tmp_path / "exp.json"
    # dataset and schema paths resolve against the config file's directory
    relative = os.path.relpath(ADULT_CSV, tmp_path)
    cfg_path.write_text(json.dumps(small_config(dataset=relative, schema=os.path.relpath(ADULT_SCHEMA, tmp_path))))
    cfg = evaluation.load_config(cfg_path)
    assert cfg.dataset == ADULT_CSV.resolve()
    assert cfg.subsample == 1500 and cfg.ks == (10, 100) and cfg.seeds == (0,)
    assert parse_config(small_config(full_size=True)).subsample is None
    cfg_path.write_text("{oops")
    with pytest.raises(ConfigError, match="not valid JSON"):
        evaluation.load_config(cfg_path)


def test_experiment_structure_and_determinism(tmp_path):
    config = parse_config(small_config(output_dir=str(tmp_path / "anon")))
    reports = run_experiment(config)
    assert [(r.method, r.k) for r in reports] == [("AG", 10), ("AG", 100), ("mondrian", 10), ("mondrian", 100)]
    for r in reports:
        assert r.kanonymity.passed and r.kanonymity.min_group_size >= r.k
        assert 0 <= r.baseline_accuracy <= 1 and 0 <= r.accuracy <= 1
        assert (r.ag_accuracy is None) == (r.method != "AG")
    assert len(list((tmp_path / "anon").glob("*.csv"))) == 4
    write_reports(reports, tmp_path / "a.jsonl")
    write_plot_data(reports, tmp_path / "a.csv")
    again = run_experiment(config)
    write_reports(again, tmp_path / "b.jsonl")
    write_plot_data(again, tmp_path / "b.csv")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header.startswith("method,k,accuracy")
    row = json.loads((tmp_path / "a.jsonl").read_text().splitlines()[0])
    assert "timings" not in row and row["kanonymity"]["pass"] is True


def test_plot_rows_aggregate_over_seeds():
    reports = run_experiment(parse_config(small_config(seeds=[0, 1], ks=[50], methods=["AG"])))
    rows = {r["method"]: r for r in plot_rows(reports)}
    accs = [r.ag_accuracy for r in reports]
    assert rows["AG"]["accuracy"] == pytest.approx(np.mean(accs))
    assert rows["AG"]["accuracy_std"] == pytest.approx(np.std(accs))
    assert rows["baseline"]["runs"] == 2


def test_failed_verification_aborts(monkeypatch):
    def broken(train, labels, config):
        # drops the anonymization entirely: QI values stay unique
        return train, None

    monkeypatch.setattr(evaluation, "anonymize", broken)
    with pytest.raises(VerificationError, match="not 10-anonymous"):
        run_experiment(parse_config(small_config(ks=[10], methods=["AG"])))


def test_experiment_with_attacks():
    doc = {
        "dataset": str(NURSERY_CSV),
        "schema": str(NURSERY_SCHEMA),
        "qi_list": ["parents", "has_nurs", "form", "children", "housing", "finance", "social", "health"],
        "ks": [100],
        "methods": ["AG"],
        "learners": ["dt"],
        "subsample": 2000,
        "attacks": {
            "membership": {"learner": {"preset": "attack-mlp", "epochs": 10}},
            "attribute": {"secret": "social", "max_records": 300},
        },
    }
    (report,) = run_experiment(parse_config(doc))
    for when in ("before", "after"):
        assert set(report.attacks[when]) == {"membership", "attribute"}
        assert 0 <= report.attacks[when]["attribute"]["accuracy"] <= 1
    bad = dict(doc, attacks={"attribute": {"secret": "parents_age"}})
    with pytest.raises(ConfigError, match="parents_age"):
        parse_config(bad)


def test_feature_selection_in_experiment():
    (report,) = run_experiment(parse_config(small_config(ks=[20], methods=["AG"], feature_selection=6)))
    assert report.feature_selection == 6
    assert 1 <= len(report.qi) <= 6
