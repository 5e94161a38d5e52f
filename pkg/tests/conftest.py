import functools
import sys
from pathlib import Path

import numpy as np
import pytest

from anonkit.tabular import Dataset, FeatureSpec, Schema, load_csv, load_schema

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
FIXTURES = Path(__file__).resolve().parent / "fixtures"
ADULT_CSV = DATA / "adult.csv"
ADULT_SCHEMA = DATA / "adult.schema.json"
NURSERY_CSV = DATA / "nursery_like.csv"
NURSERY_SCHEMA = DATA / "nursery_like.schema.json"

sys.path.insert(0, str(Path(__file__).resolve().parent))

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@functools.lru_cache(maxsize=None)
def adult() -> Dataset:
    return load_csv(ADULT_CSV, load_schema(ADULT_SCHEMA))


@functools.lru_cache(maxsize=None)
def nursery() -> Dataset:
    return load_csv(NURSERY_CSV, load_schema(NURSERY_SCHEMA))


def random_dataset(seed: int, n: int | None = None, n_qi: int | None = None, n_other: int = 1, n_classes: int = 2):
    """Mixed-type random table; returns (dataset, qi names).

    Numeric columns mix small integer grids (lots of ties) with continuous
    values; categorical columns have 2-6 categories with skewed frequencies.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(50, 2001)) if n is None else n
    n_qi = int(rng.integers(2, 9)) if n_qi is None else n_qi
    features, cols = [], []
    for j in range(n_qi + n_other):
        name = f"f{j}"
        if rng.random() < 0.5:
            m = int(rng.integers(2, 7))
            features.append(FeatureSpec(name, "categorical", tuple(f"c{i}" for i in range(m))))
            p = rng.dirichlet(np.ones(m))
            cols.append(rng.choice(m, size=n, p=p).astype(float))
        else:
            features.append(FeatureSpec(name, "numeric"))
            if rng.random() < 0.5:
                cols.append(rng.integers(0, int(rng.integers(2, 30)), size=n).astype(float))
            else:
                cols.append(np.round(rng.normal(50, 15, size=n), 3))
    schema = Schema(tuple(features), "y", tuple(f"k{i}" for i in range(n_classes)))
    values = np.column_stack(cols)
    labels = rng.integers(0, n_classes, size=n)
    return Dataset(schema, values, labels, np.arange(n)), [f"f{j}" for j in range(n_qi)]


@pytest.fixture
def adult_data():
    return adult()


@pytest.fixture
def nursery_data():
    return nursery()
