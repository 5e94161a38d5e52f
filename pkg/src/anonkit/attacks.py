"""Membership and attribute inference attacks used to measure leakage.

Membership: the attacker knows part of the training data (the strong attack)
and trains a classifier on ``[score vector of the target | one-hot true
label]`` to tell members from non-members.  Attribute: for each record every
value of the secret categorical feature is tried and the value giving the
highest score to the record's true label is guessed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from anonkit import learners
from anonkit.learners import ClassificationModel, LearnerConfig
from anonkit.tabular import Dataset

MODEL = "model"
THRESHOLD = "threshold"


def default_attack_model() -> LearnerConfig:
    return LearnerConfig(
        "mlp", hidden_layers=(64,), activation="relu", learning_rate=1e-3, epochs=100, batch_size=64, l2=0.0
    )


@dataclass(frozen=True)
class MembershipAttackConfig:
    attack_model: LearnerConfig = field(default_factory=default_attack_model)
    method: str = MODEL
    sort_scores: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.method not in (MODEL, THRESHOLD):
            raise ValueError(f"unknown membership attack method {self.method!r}")


@dataclass(frozen=True)
class AttributeAttackConfig:
    max_records: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class AttackResult:
    """Metrics plus the confusion matrix they come from (rows: actual, cols: guessed)."""

    accuracy: float
    precision: float
    recall: float
    confusion: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return int(sum(sum(r) for r in self.confusion))

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "confusion": [list(r) for r in self.confusion],
        }


def _confusion(actual: np.ndarray, guess: np.ndarray, size: int) -> np.ndarray:
    cm = np.zeros((size, size), dtype=np.int64)
    np.add.at(cm, (actual, guess), 1)
    return cm


def binary_result(actual: np.ndarray, guess: np.ndarray) -> AttackResult:
    """Positive class is 1 (member); precision is 0 when nothing is flagged."""
    cm = _confusion(np.asarray(actual), np.asarray(guess), 2)
    tp, fp, fn = cm[1, 1], cm[0, 1], cm[1, 0]
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    acc = np.trace(cm) / cm.sum()
    return AttackResult(float(acc), float(precision), float(recall), tuple(tuple(int(v) for v in r) for r in cm))


def macro_result(actual: np.ndarray, guess: np.ndarray, size: int) -> AttackResult:
    """Macro precision/recall over the values that occur as actual or guess."""
    cm = _confusion(np.asarray(actual), np.asarray(guess), size)
    present = np.flatnonzero(cm.sum(axis=0) + cm.sum(axis=1))
    precisions, recalls = [], []
    for v in present:
        guessed, real = cm[:, v].sum(), cm[v, :].sum()
        precisions.append(cm[v, v] / guessed if guessed else 0.0)
        recalls.append(cm[v, v] / real if real else 0.0)
    acc = np.trace(cm) / cm.sum()
    return AttackResult(
        float(acc), float(np.mean(precisions)), float(np.mean(recalls)), tuple(tuple(int(v) for v in r) for r in cm)
    )


def attack_features(target: ClassificationModel, data: Dataset, sort_scores: bool = True) -> np.ndarray:
    scores = np.asarray(target.predict_scores(learners.encode_for(target, data)), dtype=np.float64)
    if sort_scores:
        scores = -np.sort(-scores, axis=1)
    onehot = np.eye(target.n_classes)[data.labels]
    return np.hstack([scores, onehot])


def _threshold_fit(top: np.ndarray, member: np.ndarray) -> float:
    """Threshold on the top score maximizing training accuracy (flag if score >= t)."""
    candidates = np.unique(top)
    best_t, best_acc = np.inf, np.mean(member == 0)
    for t in candidates:
        acc = np.mean((top >= t) == (member == 1))
        if acc > best_acc:
            best_t, best_acc = t, acc
    return float(best_t)


def membership_attack(
    target: ClassificationModel,
    members: Dataset,
    non_members: Dataset,
    config: MembershipAttackConfig | None = None,
) -> AttackResult:
    """Train and score a membership classifier against ``target``.

    Both sides are cut to the smaller size (seeded), then each side is halved
    into attack-train and attack-test, so both halves hold exactly 50 %
    members.  Metrics come from attack-test only.
    """
    config = config or MembershipAttackConfig()
    if members.schema != non_members.schema:
        raise ValueError("members and non-members use different schemas")
    if np.intersect1d(members.row_ids, non_members.row_ids).size:
        raise ValueError("members and non-members share row ids")
    m = min(len(members), len(non_members))
    if m < 2:
        raise ValueError("need at least two records on each side")
    rng = np.random.default_rng(config.seed)
    sides = []
    for data in (members, non_members):
        keep = np.sort(rng.choice(len(data), size=m, replace=False))
        perm = rng.permutation(m)
        feats = attack_features(target, data.take(keep), config.sort_scores)
        sides.append((feats[perm[: m // 2]], feats[perm[m // 2 :]]))
    (mem_train, mem_test), (non_train, non_test) = sides
    X_train = np.vstack([mem_train, non_train])
    y_train = np.r_[np.ones(len(mem_train), dtype=np.int64), np.zeros(len(non_train), dtype=np.int64)]
    X_test = np.vstack([mem_test, non_test])
    y_test = np.r_[np.ones(len(mem_test), dtype=np.int64), np.zeros(len(non_test), dtype=np.int64)]
    if config.method == THRESHOLD:
        top_train = np.max(X_train[:, : target.n_classes], axis=1)
        t = _threshold_fit(top_train, y_train)
        guess = (np.max(X_test[:, : target.n_classes], axis=1) >= t).astype(np.int64)
    else:
        attack = learners.fit(config.attack_model, X_train, y_train, 2)
        guess = attack.predict(X_test)
    return binary_result(y_test, guess)


def attribute_attack(
    target: ClassificationModel,
    data: Dataset,
    secret_feature: str,
    config: AttributeAttackConfig | None = None,
) -> AttackResult:
    config = config or AttributeAttackConfig()
    schema = data.schema
    spec = schema.feature(secret_feature)
    if not spec.is_categorical:
        raise ValueError(f"secret feature {secret_feature!r} must be categorical")
    if secret_feature not in target.features:
        raise ValueError(f"secret feature {secret_feature!r} is not an input of the target model")
    if config.max_records is not None and len(data) > config.max_records:
        keep = np.sort(np.random.default_rng(config.seed).choice(len(data), config.max_records, replace=False))
        data = data.take(keep)
    j = schema.index(secret_feature)
    rows = np.arange(len(data))
    label_scores = np.empty((len(data), len(spec.categories)))
    for c in range(len(spec.categories)):
        values = data.values.copy()
        values[:, j] = c
        scores = target.predict_scores(learners.encode_for(target, data.with_values(values)))
        label_scores[:, c] = scores[rows, data.labels]
    guess = np.argmax(label_scores, axis=1)
    return macro_result(data.values[:, j].astype(np.int64), guess, len(spec.categories))


def constant_guess_accuracy(data: Dataset, secret_feature: str, value: int = 0) -> float:
    return float(np.mean(data.column(secret_feature) == value))
