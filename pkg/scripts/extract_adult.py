"""Extract the UCI Adult census table into data/adult.csv.

The raw table is read from the parquet copy bundled in the pytorch-widedeep
wheel (the sandbox has no route to the UCI archive).  Columns are renamed to
the UCI names, ``fnlwgt`` and ``education`` are dropped, and ``?`` is kept as
an ordinary category value.

    pip download --no-deps -d /tmp/wd pytorch-widedeep
    python scripts/extract_adult.py /tmp/wd/pytorch_widedeep-*.whl
"""
import csv
import io
import json
import sys
import zipfile
from pathlib import Path

import pyarrow.parquet as pq

MEMBER = "pytorch_widedeep/datasets/data/adult.parquet.brotli"
RENAME = {"educational-num": "education-num", "gender": "sex"}
FEATURES = [
    ("age", "numeric"),
    ("workclass", "categorical"),
    ("education-num", "numeric"),
    ("marital-status", "categorical"),
    ("occupation", "categorical"),
    ("relationship", "categorical"),
    ("race", "categorical"),
    ("sex", "categorical"),
    ("capital-gain", "numeric"),
    ("capital-loss", "numeric"),
    ("hours-per-week", "numeric"),
    ("native-country", "categorical"),
]
LABEL = "income"


def main(wheel: str, out_dir: str = "data") -> None:
    with zipfile.ZipFile(wheel) as zf:
        frame = pq.read_table(io.BytesIO(zf.read(MEMBER))).to_pandas()
    frame = frame.rename(columns=RENAME)
    out = Path(out_dir)
    features = []
    for name, kind in FEATURES:
        spec = {"name": name, "kind": kind}
        if kind == "categorical":
            spec["categories"] = sorted(frame[name].unique().tolist())
        features.append(spec)
    schema = {
        "features": features,
        "label": LABEL,
        "label_classes": sorted(frame[LABEL].unique().tolist()),
    }
    (out / "adult.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    columns = [name for name, _ in FEATURES] + [LABEL]
    with open(out / "adult.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in frame[columns].itertuples(index=False):
            writer.writerow(row)
    print(f"wrote {len(frame)} rows to {out / 'adult.csv'}")


if __name__ == "__main__":
    main(*sys.argv[1:])
