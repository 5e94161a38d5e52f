"""Slow, independent reference implementations used to derive expected values.

Pure Python with exact fractions; they share no code with the package.
"""
from __future__ import annotations

from fractions import Fraction


def encode_rows(records, qi, categories):
    """One-hot encode ``records`` (dicts) over ``qi``; numeric QIs pass through.

    ``categories`` maps a categorical QI name to its category list.
    """
    out, columns = [], []
    for name in qi:
        if name in categories:
            columns.extend((name, c) for c in categories[name])
        else:
            columns.append((name, None))
    for rec in records:
        row = []
        for name, cat in columns:
            row.append(Fraction(int(rec[name] == cat)) if cat is not None else Fraction(rec[name]))
        out.append(row)
    return out, columns


def _gini_weighted(groups):
    n = sum(len(g) for g in groups)
    total = Fraction(0)
    for g in groups:
        if not g:
            continue
        counts = {}
        for label in g:
            counts[label] = counts.get(label, 0) + 1
        impurity = 1 - sum(Fraction(c, len(g)) ** 2 for c in counts.values())
        total += Fraction(len(g), n) * impurity
    return total


def cart(rows, labels, k):
    """Exhaustive CART with ``min_samples_leaf = k``.

    Returns nested dicts: {"leaf": [indices]} or {"col", "thr", "left", "right"}.
    Candidate thresholds are midpoints of consecutive distinct values, rows with
    x <= thr go left, the lowest weighted Gini wins, ties go to the lowest column
    and then the lowest threshold.  Impure nodes split even at zero gain.
    """

    def grow(idx):
        ys = [labels[i] for i in idx]
        if len(set(ys)) == 1:
            return {"leaf": idx}
        best = None
        for col in range(len(rows[0])):
            values = sorted({rows[i][col] for i in idx})
            for a, b in zip(values, values[1:]):
                thr = (a + b) / 2
                left = [i for i in idx if rows[i][col] <= thr]
                right = [i for i in idx if rows[i][col] > thr]
                if len(left) < k or len(right) < k:
                    continue
                score = _gini_weighted([[labels[i] for i in left], [labels[i] for i in right]])
                if best is None or score < best[0]:
                    best = (score, col, thr, left, right)
        if best is None:
            return {"leaf": idx}
        _, col, thr, left, right = best
        return {"col": col, "thr": thr, "left": grow(left), "right": grow(right)}

    return grow(list(range(len(rows))))


def leaves_in_order(tree):
    """Leaves depth-first, left before right."""
    if "leaf" in tree:
        return [tree["leaf"]]
    return leaves_in_order(tree["left"]) + leaves_in_order(tree["right"])


def shape(tree):
    """Compact tree shape: leaf sizes and split columns, e.g. [0, [2], [4]]."""
    if "leaf" in tree:
        return [len(tree["leaf"])]
    return [tree["col"], shape(tree["left"]), shape(tree["right"])]


def representative(rows, labels, row_ids, members):
    """Majority label (ties lowest), lower-middle median of the majority rows,
    then the nearest majority row by squared distance (ties lowest row id)."""
    counts = {}
    for i in members:
        counts[labels[i]] = counts.get(labels[i], 0) + 1
    majority = min(counts, key=lambda c: (-counts[c], c))
    maj = [i for i in members if labels[i] == majority]
    median = []
    for col in range(len(rows[0])):
        vals = sorted(rows[i][col] for i in maj)
        median.append(vals[(len(vals) - 1) // 2])
    dist = {i: sum((rows[i][c] - median[c]) ** 2 for c in range(len(median))) for i in maj}
    best = min(maj, key=lambda i: (dist[i], row_ids[i]))
    return best, majority, median


def min_max_scale(rows):
    cols = list(zip(*rows))
    lo = [min(c) for c in cols]
    span = [(max(c) - min(c)) or Fraction(1) for c in cols]
    return [[(v - lo[j]) / span[j] for j, v in enumerate(r)] for r in rows]


def algorithm(records, qi, categories, labels, k, row_ids=None):
    """Reference accuracy-guided anonymization.

    Returns (anonymized records, {leaf position: representative row id},
    tree shape).
    """
    row_ids = list(range(len(records))) if row_ids is None else list(row_ids)
    rows, _ = encode_rows(records, qi, categories)
    tree = cart(rows, labels, k)
    scaled = min_max_scale(rows)
    out = [dict(r) for r in records]
    reps = []
    for members in leaves_in_order(tree):
        rep, _, _ = representative(scaled, labels, row_ids, members)
        reps.append(row_ids[rep])
        for i in members:
            for name in qi:
                out[i][name] = records[rep][name]
    return out, reps, shape(tree)


def pairwise_k_anonymous(rows, k):
    """O(n^2) check: every row has at least k-1 other rows with equal QI values."""
    for i, a in enumerate(rows):
        same = sum(1 for b in rows if tuple(a) == tuple(b))
        if same < k:
            return False
    return True
