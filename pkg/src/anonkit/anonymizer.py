"""Accuracy-guided k-anonymization.

A CART tree is grown on the one-hot encoded quasi-identifiers against the
labels a trained model predicts (or the true labels), with every leaf required
to hold at least ``k`` rows.  Each leaf becomes one equivalence class: all of
its rows take the quasi-identifier values of a single member, the
majority-label row nearest to the coordinate-wise median of the majority-label
rows.  Everything else in the record is left as it was.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from anonkit import learners
from anonkit.learners import ClassificationModel, LearnerConfig
from anonkit.learners.tree import TreeStructure, grow_tree
from anonkit.tabular import Dataset, EncodedMatrix, QuasiIdentifierSet, one_hot_encode, project, split

logger = logging.getLogger(__name__)

MODEL_PREDICTIONS = "model_predictions"
TRUE_LABELS = "true_labels"
LABEL_SOURCES = (MODEL_PREDICTIONS, TRUE_LABELS)
DISTANCE_TIE_TOL = 1e-9
CRITERION_ALIASES = {"gini": "gini", "information_gain": "information_gain", "infogain": "information_gain", "entropy": "information_gain"}


def normalize_criterion(name: str) -> str:
    try:
        return CRITERION_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown split criterion {name!r}") from None


@dataclass(frozen=True)
class AnonymizationConfig:
    k: int
    qi: QuasiIdentifierSet
    label_source: str = MODEL_PREDICTIONS
    criterion: str = "gini"
    seed: int = 0

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.qi.names:
            raise ValueError("quasi-identifier set is empty")
        if self.label_source not in LABEL_SOURCES:
            raise ValueError(f"unknown label source {self.label_source!r}")
        object.__setattr__(self, "criterion", normalize_criterion(self.criterion))


@dataclass(frozen=True)
class LeafCluster:
    node_id: int
    member_row_ids: np.ndarray
    majority_label: int
    median_point: np.ndarray
    representative_row_id: int

    @property
    def size(self) -> int:
        return len(self.member_row_ids)


@dataclass
class AnonymizerTree:
    structure: TreeStructure
    column_map: tuple
    k: int
    criterion: str
    leaves: list[LeafCluster] = field(default_factory=list)

    def representative_of(self) -> dict[int, int]:
        """row_id -> representative row_id."""
        out = {}
        for leaf in self.leaves:
            for rid in leaf.member_row_ids.tolist():
                out[rid] = leaf.representative_row_id
        return out

    def to_dict(self) -> dict:
        s = self.structure
        nodes = []
        for i in range(s.node_count):
            if s.feature[i] >= 0:
                feat, cat = self.column_map[s.feature[i]]
                nodes.append(
                    {
                        "id": i,
                        "feature": feat,
                        "category": cat,
                        "threshold": float(s.threshold[i]),
                        "left": int(s.left[i]),
                        "right": int(s.right[i]),
                    }
                )
            else:
                nodes.append({"id": i, "leaf": True, "size": int(s.counts[i].sum())})
        return {
            "k": self.k,
            "criterion": self.criterion,
            "columns": [[f, c] for f, c in self.column_map],
            "nodes": nodes,
            "leaves": [
                {
                    "node": leaf.node_id,
                    "members": leaf.member_row_ids.tolist(),
                    "majority_label": leaf.majority_label,
                    "median": leaf.median_point.tolist(),
                    "representative": leaf.representative_row_id,
                }
                for leaf in self.leaves
            ],
        }


class Representative(NamedTuple):
    index: int
    majority_label: int
    median_point: np.ndarray


def choose_representative(points: np.ndarray, labels: Sequence[int], row_ids: Sequence[int] | None = None) -> Representative:
    """Pick the cluster member that stands in for the whole cluster.

    Majority label by count, ties to the lowest class.  The median is taken per
    coordinate over the majority-label rows, using the lower middle value for
    an even count.  The representative is the majority-label row closest to
    that median in Euclidean distance, ties to the lowest row id.  ``index`` is
    a position into ``points``.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    labels = np.asarray(labels, dtype=np.int64)
    if len(points) == 0:
        raise ValueError("cluster is empty")
    if len(points) == 1:
        return Representative(0, int(labels[0]), points[0].copy())
    row_ids = np.arange(len(points)) if row_ids is None else np.asarray(row_ids, dtype=np.int64)
    majority = int(np.argmax(np.bincount(labels)))
    pos = np.flatnonzero(labels == majority)
    sub = points[pos]
    median = np.sort(sub, axis=0)[(len(sub) - 1) // 2]
    dist = ((sub - median) ** 2).sum(axis=1)
    # exact ties can round apart (e.g. (1/3)^2 vs (1 - 2/3)^2), so distances
    # within DISTANCE_TIE_TOL of the minimum count as tied
    tied = np.flatnonzero(dist <= dist.min() + DISTANCE_TIE_TOL)
    best = tied[np.argmin(row_ids[pos][tied])]
    return Representative(int(pos[best]), majority, median)


def build_anonymizer_tree(X_qi: EncodedMatrix, y, k: int, criterion: str = "gini") -> AnonymizerTree:
    """Grow the partitioning tree and pick every leaf's representative.

    The tree sees the unscaled encoding (CART thresholds do not care about
    per-column scale).  Representative distances use the same columns min-max
    scaled to [0, 1] with the statistics of ``X_qi``.
    """
    criterion = normalize_criterion(criterion)
    X = X_qi.values
    y = np.asarray(y, dtype=np.int64)
    n = len(X)
    if len(y) != n:
        raise ValueError(f"{len(y)} labels for {n} rows")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"cannot build {k}-anonymous groups from {n} rows")
    structure = grow_tree(X, y, int(y.max()) + 1, criterion=criterion, min_samples_leaf=k)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0] = 1.0
    scaled = (X - lo) / span
    leaf_of = structure.apply(X)
    order = structure.leaves_depth_first()
    reps = representatives(scaled, y, X_qi.row_ids, leaf_of, order)
    # member positions per leaf, ascending within each leaf
    by_leaf = np.argsort(leaf_of, kind="stable")
    nodes, starts = np.unique(leaf_of[by_leaf], return_index=True)
    members = dict(zip(nodes.tolist(), np.split(by_leaf, starts[1:])))
    tree = AnonymizerTree(structure, X_qi.column_map, int(k), criterion)
    for node, rep in zip(order, reps):
        pos = members[node]
        tree.leaves.append(
            LeafCluster(
                node_id=node,
                member_row_ids=X_qi.row_ids[pos],
                majority_label=rep.majority_label,
                median_point=rep.median_point,
                representative_row_id=int(X_qi.row_ids[rep.index]),
            )
        )
    return tree


def representatives(points: np.ndarray, labels, row_ids, group, groups: Sequence[int]) -> list[Representative]:
    """choose_representative for every group at once.

    ``group`` gives each row's group id; results follow ``groups`` and their
    ``index`` is a position into ``points``.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    row_ids = np.asarray(row_ids, dtype=np.int64)
    ids, g = np.unique(np.asarray(group), return_inverse=True)
    n_groups, n_labels = ids.size, int(labels.max()) + 1
    tally = np.bincount(g * n_labels + labels, minlength=n_groups * n_labels).reshape(n_groups, n_labels)
    majority = np.argmax(tally, axis=1)  # ties to the lowest class
    pos = np.flatnonzero(labels == majority[g])
    gm = g[pos]
    count = np.bincount(gm, minlength=n_groups)
    start = np.concatenate([[0], np.cumsum(count)[:-1]])
    mid = start + (count - 1) // 2
    medians = np.empty((n_groups, points.shape[1]))
    for j in range(points.shape[1]):
        ranked = pos[np.lexsort((points[pos, j], gm))]
        medians[:, j] = points[ranked[mid], j]
    by_group = pos[np.argsort(gm, kind="stable")]
    dist = ((points[by_group] - medians[g[by_group]]) ** 2).sum(axis=1)
    nearest = np.minimum.reduceat(dist, start)
    # within DISTANCE_TIE_TOL of the minimum count as tied, then lowest row id
    tied = dist <= nearest[g[by_group]] + DISTANCE_TIE_TOL
    big = np.iinfo(np.int64).max
    best_id = np.minimum.reduceat(np.where(tied, row_ids[by_group], big), start)
    # row ids are unique, so exactly one row per group carries its best id
    chosen = by_group[np.flatnonzero(row_ids[by_group] == best_id[g[by_group]])]
    slot = {int(v): i for i, v in enumerate(ids.tolist())}
    out = []
    for node in groups:
        i = slot[int(node)]
        out.append(Representative(int(chosen[i]), int(majority[i]), medians[i].copy()))
    return out


def anonymize(train: Dataset, labels, config: AnonymizationConfig) -> tuple[Dataset, AnonymizerTree]:
    """k-anonymize ``train`` on ``config.qi``.

    ``labels`` are the model's predictions for the rows of ``train``; they are
    ignored (and may be None) when ``config.label_source`` is ``true_labels``.
    Row count, row ids, labels and non-QI columns are returned unchanged.
    """
    if config.label_source == TRUE_LABELS:
        y = train.labels
    else:
        if labels is None:
            raise ValueError("label_source=model_predictions needs predicted labels")
        y = np.asarray(labels, dtype=np.int64)
        if y.shape != (len(train),):
            raise ValueError(f"{y.size} labels for {len(train)} rows")
    if len(train) < config.k:
        raise ValueError(f"cannot {config.k}-anonymize {len(train)} rows")
    X_qi = one_hot_encode(train, config.qi.names)
    tree = build_anonymizer_tree(X_qi, y, config.k, config.criterion)
    position = {rid: i for i, rid in enumerate(train.row_ids.tolist())}
    rep_of = tree.representative_of()
    rep_pos = np.array([position[rep_of[rid]] for rid in train.row_ids.tolist()])
    qi_cols = config.qi.indices(train.schema)
    values = train.values.copy()
    values[:, qi_cols] = train.values[rep_pos][:, qi_cols]
    logger.debug("anonymized %d rows into %d groups (k=%d)", len(train), len(tree.leaves), config.k)
    return train.with_values(values), tree


@dataclass
class PipelineResult:
    original_model: object
    anonymized: Dataset
    tree: AnonymizerTree
    retrained_model: ClassificationModel
    baseline_accuracy: float
    anonymized_accuracy: float
    splits: tuple[Dataset, Dataset, Dataset]
    anonymizer_labels: np.ndarray
    features: list[str]
    qi: QuasiIdentifierSet


def anonymize_pipeline(
    data: Dataset,
    original_model_config: LearnerConfig | None,
    retrain_config: LearnerConfig,
    config: AnonymizationConfig,
    fractions: Sequence[float] = (0.4, 0.4, 0.2),
    seed: int = 0,
    *,
    original_model=None,
    feature_selection: int | None = None,
) -> PipelineResult:
    """Split, train the original model, anonymize the second split, retrain, score.

    The original model is fit on split 1 (unless a fitted ``original_model`` is
    passed; it only needs ``predict(EncodedMatrix)``), its predictions on split
    2 guide the anonymizer, the retrained model learns the anonymized split 2,
    and both models are scored on split 3.  With ``feature_selection=m`` only
    the top-m features (chosen on split 1) are kept and the QI set shrinks to
    the kept features.
    """
    first, second, test = split(data, fractions, seed)
    qi = config.qi
    features = data.schema.names
    if feature_selection is not None:
        features = learners.select_features(one_hot_encode(first), first.labels, feature_selection)
        kept = [n for n in qi.names if n in features]
        if not kept:
            raise ValueError("no quasi-identifier survives feature selection")
        first, second, test = (project(d, features) for d in (first, second, test))
        qi = QuasiIdentifierSet.of(first.schema, kept)
        features = first.schema.names
    n_classes = data.schema.n_classes
    if original_model is None:
        if original_model_config is None:
            raise ValueError("need an original model or its learner config")
        original_model = learners.fit(original_model_config, one_hot_encode(first, features), first.labels, n_classes)
    if config.label_source == TRUE_LABELS:
        guide = second.labels
    else:
        guide = np.asarray(original_model.predict(one_hot_encode(second, features)), dtype=np.int64)
    run_config = AnonymizationConfig(config.k, qi, config.label_source, config.criterion, config.seed)
    anonymized, tree = anonymize(second, guide, run_config)
    retrained = learners.fit(retrain_config, one_hot_encode(anonymized, features), anonymized.labels, n_classes)
    test_x = one_hot_encode(test, features)
    baseline = float(np.mean(original_model.predict(test_x) == test.labels))
    after = float(np.mean(retrained.predict(test_x) == test.labels))
    return PipelineResult(
        original_model=original_model,
        anonymized=anonymized,
        tree=tree,
        retrained_model=retrained,
        baseline_accuracy=baseline,
        anonymized_accuracy=after,
        splits=(first, second, test),
        anonymizer_labels=guide,
        features=list(features),
        qi=qi,
    )
