"""Generate data/nursery_like.csv, a stand-in with the shape of UCI Nursery.

Rows are the full cartesian product of the eight Nursery attributes (12960
rows, the real attribute domains).  Labels come from a fixed additive points
rule, not from the original hierarchical decision model, so only the shape and
the dependence of the label on every attribute (``social`` included) carry over.
"""
import csv
import itertools
import json
import sys
from pathlib import Path

ATTRIBUTES = {
    "parents": {"usual": 0, "pretentious": 1, "great_pret": 2},
    "has_nurs": {"proper": 0, "less_proper": 1, "improper": 2, "critical": 3, "very_crit": 4},
    "form": {"complete": 0, "completed": 1, "incomplete": 2, "foster": 3},
    "children": {"1": 0, "2": 1, "3": 2, "more": 2},
    "housing": {"convenient": 0, "less_conv": 1, "critical": 2},
    "finance": {"convenient": 0, "inconv": 1},
    "social": {"nonprob": 0, "slightly_prob": 1, "problematic": 3},
    "health": {"recommended": 0, "priority": 2, "not_recom": None},
}
CLASSES = ["not_recom", "recommend", "very_recom", "priority", "spec_prior"]


def label(values: dict) -> str:
    if values["health"] == "not_recom":
        return "not_recom"
    points = sum(ATTRIBUTES[name][value] for name, value in values.items())
    if points <= 1:
        return "recommend"
    if points <= 4:
        return "very_recom"
    if points <= 9:
        return "priority"
    return "spec_prior"


def main(out_dir: str = "data") -> None:
    out = Path(out_dir)
    names = list(ATTRIBUTES)
    schema = {
        "features": [
            {"name": n, "kind": "categorical", "categories": list(ATTRIBUTES[n])} for n in names
        ],
        "label": "class",
        "label_classes": CLASSES,
    }
    (out / "nursery_like.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    counts = dict.fromkeys(CLASSES, 0)
    with open(out / "nursery_like.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ["class"])
        for combo in itertools.product(*(list(ATTRIBUTES[n]) for n in names)):
            cls = label(dict(zip(names, combo)))
            counts[cls] += 1
            writer.writerow(list(combo) + [cls])
    print(counts)


if __name__ == "__main__":
    main(*sys.argv[1:])
