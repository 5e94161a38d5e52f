"""Binary CART.

Numeric and one-hot columns share one code path: candidate thresholds are the
midpoints between consecutive distinct sorted values and rows with
``x <= threshold`` go left.  A split is admissible only when both children
keep at least ``min_samples_leaf`` rows.  Growth stops at purity, at
``max_depth`` or when no admissible split exists; a zero-gain split is still
taken while the node is impure.

Split search is vectorized per node: columns are sorted once at the root, each
node keeps its rows in that order, and class counts are accumulated with a
cumulative sum, so the chosen split depends only on the multiset of (x, y)
pairs in the node, not on row order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from anonkit.learners.base import DECISION_TREE, ClassificationModel, LearnerConfig


@dataclass
class TreeStructure:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, n_classes) class counts of the training rows reaching each node
    depth: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def leaves_depth_first(self) -> list[int]:
        """Leaf ids in depth-first order, left child before right."""
        out, stack = [], [0]
        while stack:
            node = stack.pop()
            if self.feature[node] < 0:
                out.append(node)
            else:
                stack.append(int(self.right[node]))
                stack.append(int(self.left[node]))
        return out

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        counts = self.counts[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "depth": self.depth.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeStructure":
        return cls(
            np.array(doc["feature"], dtype=np.int64),
            np.array(doc["threshold"], dtype=np.float64),
            np.array(doc["left"], dtype=np.int64),
            np.array(doc["right"], dtype=np.int64),
            np.array(doc["counts"], dtype=np.float64).reshape(len(doc["feature"]), -1),
            np.array(doc["depth"], dtype=np.int64),
        )


SCORE_TIE_TOL = 1e-12


def _xlogx(c: np.ndarray) -> np.ndarray:
    safe = np.where(c > 0, c, 1.0)
    return c * np.log(safe)


def best_split(
    X: np.ndarray,
    onehot: np.ndarray,
    features: np.ndarray,
    min_samples_leaf: int,
    criterion: str = "gini",
) -> tuple[int, float] | None:
    """Best admissible (column, threshold) over ``features``, or None.

    Ties in the split score go to the first column in ``features`` and then to
    the smallest threshold.
    """
    if features.size == 0:
        return None
    sub = X[:, features]
    order = np.argsort(sub, axis=0, kind="stable")
    return _best_sorted_split(np.take_along_axis(sub, order, axis=0), order, onehot, features, min_samples_leaf, criterion)


def _best_sorted_split(
    xs: np.ndarray,
    order: np.ndarray,
    onehot: np.ndarray,
    features: np.ndarray,
    min_samples_leaf: int,
    criterion: str,
) -> tuple[int, float] | None:
    """Split search on columns already sorted.

    ``xs`` (n, f) holds each column's sorted values and ``order`` the matching
    row positions into ``onehot`` (one row per sample, one column per class).
    """
    n = xs.shape[0]
    lo, hi = min_samples_leaf - 1, n - min_samples_leaf  # left sizes lo+1 .. hi
    if hi <= lo or features.size == 0:
        return None
    valid = xs[lo + 1 : hi + 1] > xs[lo:hi]
    usable = valid.any(axis=0)
    if not usable.any():
        return None
    if not usable.all():
        # columns without an admissible cut drop out; order (and so tie-breaking) is kept
        xs, order, features, valid = xs[:, usable], order[:, usable], features[usable], valid[:, usable]
    n_left = np.arange(lo + 1, hi + 1, dtype=np.float64)[:, None]
    n_right = n - n_left
    if criterion == "gini" and onehot.shape[1] == 2:
        cum1 = np.cumsum(onehot[:, 1][order], axis=0)  # (n, f)
        l1 = cum1[lo:hi]
        score = _binary_gini_score(l1, cum1[-1] - l1, n_left, n_right)
    else:
        cum = np.cumsum(onehot[order], axis=0)  # (n, f, C)
        left = cum[lo:hi]
        score = _split_score(left, cum[-1] - left, n_left, n_right, criterion)
    return _pick(score, valid, xs, features, lo)


def _binary_gini_score(l1: np.ndarray, r1: np.ndarray, n_left, n_right) -> np.ndarray:
    """Two classes: class-1 counts left and right of each cut determine both sides."""
    l0 = n_left - l1
    r0 = n_right - r1
    return (l1 * l1 + l0 * l0) / n_left + (r1 * r1 + r0 * r0) / n_right


def _split_score(left: np.ndarray, right: np.ndarray, n_left, n_right, criterion: str) -> np.ndarray:
    """Higher is better; ``left`` and ``right`` hold class counts on the last axis."""
    if criterion == "gini":
        # minimizing weighted Gini == maximizing sum(L^2)/nL + sum(R^2)/nR
        return np.einsum("...k,...k->...", left, left) / n_left + np.einsum("...k,...k->...", right, right) / n_right
    # minimizing weighted entropy == maximizing sum c*log(c) - n*log(n) per side
    return _xlogx(left).sum(axis=-1) - _xlogx(n_left) + _xlogx(right).sum(axis=-1) - _xlogx(n_right)


def _pick(score: np.ndarray, valid: np.ndarray, xs: np.ndarray, features: np.ndarray, lo: int) -> tuple[int, float]:
    score = np.where(valid, score, -np.inf)
    best = score.max()
    # equal scores can round apart; anything within SCORE_TIE_TOL (relative) is a tie
    tied = score >= best - SCORE_TIE_TOL * max(1.0, abs(best))
    flat = int(np.argmax(tied.T))  # feature-major: lowest column wins ties
    fpos, i = divmod(flat, score.shape[0])
    a, b = xs[lo + i, fpos], xs[lo + i + 1, fpos]
    threshold = (a + b) / 2.0
    if threshold >= b:  # adjacent floats: midpoint rounds up to b
        threshold = a
    return int(features[fpos]), float(threshold)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    *,
    criterion: str = "gini",
    min_samples_leaf: int = 1,
    max_depth: int | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeStructure:
    """CART growth; node ids are numbered depth-first, left child first.

    With ``max_features`` set, each node draws a random column order from
    ``rng``; the first ``max_features`` columns are searched and, only if none
    of them admits a split, the remaining ones.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if max_features is not None and max_features < X.shape[1]:
        return _grow_depth_first(X, y, n_classes, criterion, min_samples_leaf, max_depth, max_features, rng)
    return _grow_level_wise(X, y, n_classes, criterion, min_samples_leaf, max_depth)


def _grow_depth_first(X, y, n_classes, criterion, min_samples_leaf, max_depth, max_features, rng) -> TreeStructure:
    """One node at a time in depth-first order, so per-node random draws follow that order."""
    n, width = X.shape
    onehot = np.eye(n_classes)[y]
    all_cols = np.arange(width)
    feature, threshold, left, right, counts, depth = [-1], [0.0], [-1], [-1], [onehot.sum(axis=0)], [0]
    # every node carries its rows sorted by each column, shape (width, rows);
    # a stable sort once at the root, then order-preserving filtering, gives
    # the (value, row index) order a per-node stable sort would
    stack = [(0, np.arange(n), np.argsort(X, axis=0, kind="stable").T.copy())]
    goes_left = np.zeros(n, dtype=bool)

    def search(cols, sorted_rows):
        ids = sorted_rows[cols]  # (f, m)
        return _best_sorted_split(X[ids, cols[:, None]].T, ids.T, onehot, cols, min_samples_leaf, criterion)

    while stack:
        node, rows, sorted_rows = stack.pop()
        c = counts[node]
        if c.max() == rows.size or (max_depth is not None and depth[node] >= max_depth):
            continue
        if max_features is not None and max_features < width:
            perm = rng.permutation(width)
            found = search(np.sort(perm[:max_features]), sorted_rows)
            if found is None:
                found = search(np.sort(perm[max_features:]), sorted_rows)
        elif rows.size >= 2 * min_samples_leaf:
            found = search(all_cols, sorted_rows)
        else:
            found = None
        if found is None:
            continue
        col, thr = found
        mask = X[rows, col] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        goes_left[rows] = mask
        on_left = goes_left[sorted_rows]
        lsorted = sorted_rows[on_left].reshape(width, lrows.size)
        rsorted = sorted_rows[~on_left].reshape(width, rrows.size)
        lid, rid = len(feature), len(feature) + 1
        for child_rows in (lrows, rrows):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(onehot[child_rows].sum(axis=0))
            depth.append(depth[node] + 1)
        feature[node], threshold[node], left[node], right[node] = col, thr, lid, rid
        stack.append((rid, rrows, rsorted))
        stack.append((lid, lrows, lsorted))
    return TreeStructure(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.float64).reshape(-1, n_classes),
        np.array(depth, dtype=np.int64),
    )


def _grow_level_wise(X, y, n_classes, criterion, min_samples_leaf, max_depth) -> TreeStructure:
    """All nodes of one depth are searched together.

    Every column keeps the frontier rows sorted by (node, value, row index), so
    each node is a contiguous segment at the same positions in all columns and
    the split search becomes segmented cumulative sums over one array.  Scores
    and tie rules match the depth-first grower, and ids are renumbered into the
    same depth-first order at the end, so both growers build the same tree.
    """
    n, width = X.shape
    onehot = np.eye(n_classes)[y]
    binary = criterion == "gini" and n_classes == 2
    feature, threshold, left, right, depth = [-1], [0.0], [-1], [-1], [0]
    counts = [onehot.sum(axis=0)]
    S = np.argsort(X, axis=0, kind="stable").T  # (width, frontier rows)
    seg_node = np.array([0])
    seg_size = np.array([n])
    col_ids = np.arange(width)[:, None]
    goes_left = np.zeros(n, dtype=bool)
    level = 0
    while seg_node.size:
        seg_counts = np.array([counts[i] for i in seg_node.tolist()])
        open_ = (seg_counts.max(axis=1) < seg_size) & (seg_size >= 2 * min_samples_leaf)
        if max_depth is not None and level >= max_depth:
            open_[:] = False
        if not open_.all():
            S = S[:, np.repeat(open_, seg_size)]
            seg_node, seg_size, seg_counts = seg_node[open_], seg_size[open_], seg_counts[open_]
        if not seg_node.size:
            break
        n_seg, m = seg_node.size, S.shape[1]
        seg_start = np.concatenate([[0], np.cumsum(seg_size)[:-1]])
        seg_of = np.repeat(np.arange(n_seg), seg_size)
        n_left = (np.arange(m) - seg_start[seg_of] + 1).astype(np.float64)
        n_right = seg_size[seg_of] - n_left
        xs = X[S, col_ids]
        valid = np.zeros((width, m), dtype=bool)
        valid[:, :-1] = xs[:, 1:] > xs[:, :-1]
        valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        # only admissible cuts are scored: (column, position) pairs, flat index j * m + p
        cand = np.flatnonzero(valid)
        cj, cp = np.divmod(cand, m)
        cs = seg_of[cp]
        # cumulative class counts restarted at every segment start
        if binary:
            cum = np.cumsum(onehot[:, 1][S], axis=1)
            cum0 = np.concatenate([np.zeros((width, 1)), cum], axis=1)
            base = cum0[:, seg_start]
            l1 = cum.ravel()[cand] - base[cj, cs]
            t1 = cum0[:, seg_start + seg_size] - base
            score = _binary_gini_score(l1, t1[cj, cs] - l1, n_left[cp], n_right[cp])
        else:
            cum = np.cumsum(onehot[S], axis=1)
            cum0 = np.concatenate([np.zeros((width, 1, n_classes)), cum], axis=1)
            base = cum0[:, seg_start]
            lc = cum.reshape(width * m, n_classes)[cand] - base[cj, cs]
            tc = cum0[:, seg_start + seg_size] - base
            score = _split_score(lc, tc[cj, cs] - lc, n_left[cp], n_right[cp], criterion)
        best = np.full(n_seg, -np.inf)
        np.maximum.at(best, cs, score)
        # same tie rule as _pick: within SCORE_TIE_TOL, then lowest column, then lowest cut
        tied = score >= (best - SCORE_TIE_TOL * np.maximum(1.0, np.abs(best)))[cs]
        first = np.full(n_seg, width * m)
        np.minimum.at(first, cs[tied], cand[tied])
        split = first < width * m
        col, cut = np.divmod(np.where(split, first, 0), m)
        a, b = xs[col, cut], xs[col, np.minimum(cut + 1, m - 1)]
        thr = (a + b) / 2.0
        thr = np.where(thr >= b, a, thr)  # adjacent floats: midpoint rounds up to b

        rows = S[0]
        is_left = X[rows, col[seg_of]] <= thr[seg_of]
        left_counts = np.add.reduceat(onehot[rows] * is_left[:, None], seg_start, axis=0)
        left_size = np.add.reduceat(is_left.astype(np.int64), seg_start)
        for i in np.flatnonzero(split).tolist():
            node = int(seg_node[i])
            lid = len(feature)
            for child_counts in (left_counts[i], seg_counts[i] - left_counts[i]):
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                counts.append(child_counts)
                depth.append(level + 1)
            feature[node], threshold[node], left[node], right[node] = int(col[i]), float(thr[i]), lid, lid + 1

        # next frontier: children of split nodes, each node's rows stably
        # partitioned so every column stays sorted within the new segments
        keep = np.repeat(split, seg_size)
        S = S[:, keep]
        goes_left[rows] = is_left
        L = goes_left[S]
        sizes = seg_size[split]
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        owner = np.repeat(np.arange(sizes.size), sizes)
        cum_l = np.cumsum(L, axis=1)
        before = np.concatenate([np.zeros((width, 1), dtype=np.int64), cum_l], axis=1)[:, starts][:, owner]
        offset = np.arange(S.shape[1]) - starts[owner]
        n_l = left_size[split][owner]
        newpos = starts[owner] + np.where(L, cum_l - before - 1, n_l + offset - (cum_l - before))
        nxt = np.empty_like(S)
        np.put_along_axis(nxt, newpos, S, axis=1)
        S = nxt
        lsize, rsize = left_size[split], sizes - left_size[split]
        seg_size = np.column_stack([lsize, rsize]).ravel()
        first_child = np.array([left[i] for i in seg_node[split].tolist()], dtype=np.int64)
        seg_node = np.column_stack([first_child, first_child + 1]).ravel()
        level += 1
    return _depth_first_numbering(feature, threshold, left, right, counts, depth, n_classes)


def _depth_first_numbering(feature, threshold, left, right, counts, depth, n_classes) -> TreeStructure:
    """Renumber nodes as a depth-first, left-first grower assigns them:
    a node's children get the next two ids when the node is reached."""
    new_id = [0] * len(feature)
    nxt, stack = 1, [0]
    while stack:
        node = stack.pop()
        if feature[node] >= 0:
            new_id[left[node]], new_id[right[node]] = nxt, nxt + 1
            nxt += 2
            stack.append(right[node])
            stack.append(left[node])
    order = np.argsort(new_id)
    remap = np.array(new_id + [-1], dtype=np.int64)  # index -1 keeps leaves at -1
    return TreeStructure(
        np.array(feature, dtype=np.int64)[order],
        np.array(threshold, dtype=np.float64)[order],
        remap[np.array(left, dtype=np.int64)[order]],
        remap[np.array(right, dtype=np.int64)[order]],
        np.array(counts, dtype=np.float64).reshape(-1, n_classes)[order],
        np.array(depth, dtype=np.int64)[order],
    )


class DecisionTree(ClassificationModel):
    """Scores are the class frequencies of the training rows in the reached leaf."""

    kind = DECISION_TREE

    def __init__(self, config: LearnerConfig, n_classes: int, column_map, structure: TreeStructure):
        super().__init__(config, n_classes, column_map)
        self.structure = structure

    @classmethod
    def fit(cls, config: LearnerConfig, X: np.ndarray, y: np.ndarray, n_classes: int, column_map) -> "DecisionTree":
        structure = grow_tree(
            X,
            y,
            n_classes,
            criterion=config.criterion,
            min_samples_leaf=config.min_samples_leaf,
            max_depth=config.max_depth,
        )
        return cls(config, n_classes, column_map, structure)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        return self.structure.probabilities(X)

    def _params(self) -> dict:
        return {"tree": self.structure.to_dict()}

    @classmethod
    def _from_params(cls, config, n_classes, column_map, params) -> "DecisionTree":
        return cls(config, n_classes, column_map, TreeStructure.from_dict(params["tree"]))
