from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from anonkit.learners.base import RANDOM_FOREST, ClassificationModel, LearnerConfig, worker_count
from anonkit.learners.tree import TreeStructure, grow_tree


def resolve_max_features(spec, width: int) -> int | None:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(width)))
    if spec == "log2":
        return max(1, int(math.log2(width)))
    if isinstance(spec, float):
        return max(1, int(spec * width))
    return min(width, int(spec))


def tree_generators(seed: int, tree_count: int) -> list[np.random.Generator]:
    """One independent generator per tree, fixed before any tree is grown."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(tree_count)]


def bootstrap_indices(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, n, size=n)


class RandomForest(ClassificationModel):
    """Bagged CART trees; scores are the mean of the per-tree leaf frequencies,
    which is the vote share when the leaves are pure."""

    kind = RANDOM_FOREST

    def __init__(self, config: LearnerConfig, n_classes: int, column_map, trees: list[TreeStructure]):
        super().__init__(config, n_classes, column_map)
        self.trees = trees

    @classmethod
    def fit(cls, config: LearnerConfig, X: np.ndarray, y: np.ndarray, n_classes: int, column_map) -> "RandomForest":
        n, width = X.shape
        m = resolve_max_features(config.max_features, width)

        def grow(rng: np.random.Generator) -> TreeStructure:
            idx = bootstrap_indices(rng, n) if config.bootstrap else np.arange(n)
            return grow_tree(
                X[idx],
                y[idx],
                n_classes,
                criterion=config.criterion,
                min_samples_leaf=config.min_samples_leaf,
                max_depth=config.max_depth,
                max_features=m,
                rng=rng,
            )

        rngs = tree_generators(config.seed, config.tree_count)
        workers = min(worker_count(), len(rngs))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                trees = list(pool.map(grow, rngs))
        else:
            trees = [grow(r) for r in rngs]
        return cls(config, n_classes, column_map, trees)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            total += tree.probabilities(X)
        return total / len(self.trees)

    def _params(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def _from_params(cls, config, n_classes, column_map, params) -> "RandomForest":
        return cls(config, n_classes, column_map, [TreeStructure.from_dict(t) for t in params["trees"]])
