"""Named quasi-identifier sets and learner configurations."""
from __future__ import annotations

from anonkit.learners import LearnerConfig

QI_PRESETS: dict[str, tuple[str, ...]] = {
    "adult12": (
        "age", "workclass", "education-num", "marital-status", "occupation", "relationship",
        "race", "sex", "capital-gain", "capital-loss", "hours-per-week", "native-country",
    ),
    "adult10": (
        "age", "workclass", "education-num", "marital-status", "occupation", "relationship",
        "race", "sex", "hours-per-week", "native-country",
    ),
    "adult8": (
        "workclass", "marital-status", "occupation", "relationship", "race", "sex",
        "native-country", "education-num",
    ),
    "loan18": (
        "emp_length", "home_ownership", "annual_income", "zip_code", "purpose", "dti",
        "delinq_2yrs", "inq_last_6mths", "mths_since_last_delinq", "open_acc", "total_acc",
        "mths_since_last_record", "pub_rec", "revol_bal", "revol_util", "hardship_flag",
        "last_pymnt_amnt", "installment",
    ),
}

LEARNER_PRESETS: dict[str, LearnerConfig] = {
    "dt": LearnerConfig("decision_tree", max_depth=8, min_samples_leaf=5),
    "dt-full": LearnerConfig("decision_tree"),
    "rf": LearnerConfig("random_forest", tree_count=100, criterion="gini", max_features="sqrt"),
    "lr": LearnerConfig("logistic_regression", learning_rate=1e-2, epochs=50, batch_size=200, l2=1e-4),
    # one hidden layer of 100 relu units, adam, constant lr 0.001, batch 200, 200 epochs
    "mlp": LearnerConfig("mlp", hidden_layers=(100,), activation="relu", learning_rate=1e-3, epochs=200, batch_size=200),
    # 1024/512/256 tanh, adam lr 0.0001; epoch count is not published, 30 keeps CPU runs practical
    "mlp-deep": LearnerConfig(
        "mlp", hidden_layers=(1024, 512, 256), activation="tanh", learning_rate=1e-4, epochs=30, batch_size=200
    ),
    "attack-mlp": LearnerConfig(
        "mlp", hidden_layers=(64,), activation="relu", learning_rate=1e-3, epochs=100, batch_size=64, l2=0.0
    ),
    "attack-rf": LearnerConfig("random_forest", tree_count=100, min_samples_leaf=5),
}


def qi_preset(name: str) -> tuple[str, ...]:
    try:
        return QI_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown QI preset {name!r} (known: {', '.join(QI_PRESETS)})") from None


def learner_from_spec(spec) -> tuple[str, LearnerConfig]:
    """Resolve a preset name, or a dict with an optional ``preset`` plus overrides.

    A dict without ``preset`` is a full LearnerConfig; ``name`` labels it in reports.
    """
    if isinstance(spec, str):
        if spec not in LEARNER_PRESETS:
            raise ValueError(f"unknown learner preset {spec!r} (known: {', '.join(LEARNER_PRESETS)})")
        return spec, LEARNER_PRESETS[spec]
    if not isinstance(spec, dict):
        raise ValueError(f"learner must be a preset name or an object, got {spec!r}")
    doc = dict(spec)
    preset = doc.pop("preset", None)
    name = doc.pop("name", preset or doc.get("kind", "custom"))
    if preset is not None:
        if preset not in LEARNER_PRESETS:
            raise ValueError(f"unknown learner preset {preset!r}")
        return name, LEARNER_PRESETS[preset].replace(**doc)
    return name, LearnerConfig.from_dict(doc)
