"""Command-line interface.

Exit codes: 0 success, 1 invalid input (flags, files, configs, a failed
verification), 2 failure while running.  Diagnostics go to stderr; results go
to the files named by the flags (``verify`` also prints its report).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from anonkit import learners
from anonkit.anonymizer import MODEL_PREDICTIONS, TRUE_LABELS, AnonymizationConfig, anonymize
from anonkit.attacks import (
    MODEL,
    THRESHOLD,
    AttributeAttackConfig,
    MembershipAttackConfig,
    attribute_attack,
    membership_attack,
)
from anonkit.evaluation import (
    ConfigError,
    load_config,
    run_experiment,
    verify_k_anonymity,
    write_plot_data,
    write_reports,
)
from anonkit.learners import LayoutError
from anonkit.mondrian import mondrian_anonymize
from anonkit.presets import LEARNER_PRESETS, QI_PRESETS
from anonkit.tabular import (
    DataError,
    Dataset,
    QuasiIdentifierSet,
    SchemaError,
    load_csv,
    load_schema,
    one_hot_encode,
    split,
    write_csv,
)

logger = logging.getLogger("anonkit")

PREDICTION_COLUMN = "prediction"


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; this CLI reserves 2 for runtime failures
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(flag):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be an integer, got {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {value}")
        return value

    return parse


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seed must be an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"--seed must be >= 0, got {value}")
    return value


def _fractions(text):
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--fractions must be comma-separated numbers, got {text!r}") from None
    if len(parts) != 3 or any(p < 0 for p in parts) or abs(sum(parts) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError("--fractions needs three non-negative numbers summing to 1")
    return parts


def _add_data(p, required=True):
    p.add_argument("--input", required=required, help="CSV file with a header row")
    p.add_argument("--schema", required=True, help="schema JSON describing the CSV")


def _add_qi(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--qi", help="comma-separated quasi-identifier feature names")
    g.add_argument("--qi-preset", choices=sorted(QI_PRESETS))


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="anonkit", description="Accuracy-guided k-anonymization toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("anonymize", help="k-anonymize guided by model predictions or labels")
    _add_data(p)
    _add_qi(p)
    p.add_argument("--k", type=_positive_int("--k"), required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--labels-from", help="CSV with a 'prediction' column, one row per input row")
    src.add_argument("--model", help="model JSON whose predictions guide the partitioning")
    src.add_argument("--use-true-labels", action="store_true")
    p.add_argument("--criterion", choices=["gini", "infogain"], default="gini")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--tree-output", help="write the anonymizer tree and its groups as JSON")
    p.add_argument("--report", help="write the k-anonymity check of the output as JSON")

    p = sub.add_parser("mondrian", help="k-anonymize with median Mondrian partitioning")
    _add_data(p)
    _add_qi(p)
    p.add_argument("--k", type=_positive_int("--k"), required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report")

    p = sub.add_parser("train", help="fit a learner and save it as JSON")
    _add_data(p)
    p.add_argument("--learner", choices=sorted(LEARNER_PRESETS), default="dt")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--output", required=True, help="model JSON")
    p.add_argument("--predict-input", help="CSV to predict with the fitted model")
    p.add_argument("--predictions-out", help="where to write those predictions")
    p.add_argument("--report", help="write training accuracy as JSON")

    p = sub.add_parser("attack-membership", help="membership inference against a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--members", required=True, help="CSV of records in the model's training set")
    p.add_argument("--non-members", required=True, help="CSV of records outside it")
    p.add_argument("--schema", required=True)
    p.add_argument("--learner", choices=sorted(LEARNER_PRESETS), default="attack-mlp", help="attack model")
    p.add_argument("--method", choices=[MODEL, THRESHOLD], default=MODEL)
    p.add_argument("--unsorted-scores", action="store_true", help="keep class order in the score features")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--report", required=True)

    p = sub.add_parser("attack-attribute", help="infer a categorical feature from a saved model")
    p.add_argument("--model", required=True)
    _add_data(p)
    p.add_argument("--secret", required=True, help="categorical feature to infer")
    p.add_argument("--max-records", type=_positive_int("--max-records"))
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--report", required=True)

    p = sub.add_parser("verify", help="check that a CSV is k-anonymous")
    _add_data(p)
    _add_qi(p)
    p.add_argument("--k", type=_positive_int("--k"), required=True)
    p.add_argument("--report")

    p = sub.add_parser("experiment", help="run a configured sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--report", help="JSONL report path (default: <config stem>.report.jsonl next to the config)")
    p.add_argument("--plot-data", help="plot CSV path (default: report path with .plot.csv)")

    p = sub.add_parser("split", help="seeded three-way split")
    _add_data(p)
    p.add_argument("--fractions", type=_fractions, default=(0.4, 0.4, 0.2))
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--output", required=True, help="directory for split1.csv, split2.csv, split3.csv")
    return parser


def _load(path, schema) -> Dataset:
    if not Path(path).is_file():
        raise UsageError(f"file not found: {path}")
    return load_csv(path, schema)


def _schema(path):
    if not Path(path).is_file():
        raise UsageError(f"schema file not found: {path}")
    return load_schema(path)


def _qi(args, schema) -> QuasiIdentifierSet:
    names = QI_PRESETS[args.qi_preset] if args.qi_preset else [n.strip() for n in args.qi.split(",") if n.strip()]
    missing = [n for n in names if n not in schema.names]
    if missing:
        raise UsageError(f"--qi: unknown feature(s) {', '.join(missing)}")
    if not names:
        raise UsageError("--qi: no feature names given")
    return QuasiIdentifierSet.of(schema, names)


def _model(path):
    if not Path(path).is_file():
        raise UsageError(f"model file not found: {path}")
    try:
        return learners.load_model(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: not a usable model ({exc})") from None


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_predictions(path, schema, n) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or PREDICTION_COLUMN not in header:
            raise UsageError(f"{path}: expected a {PREDICTION_COLUMN!r} column")
        col = header.index(PREDICTION_COLUMN)
        classes = {c: i for i, c in enumerate(schema.label_classes)}
        out = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(classes[row[col]])
            except (KeyError, IndexError):
                raise UsageError(f"{path}: row {line_no}: unknown class {row[col] if col < len(row) else ''!r}") from None
    if len(out) != n:
        raise UsageError(f"{path}: {len(out)} predictions for {n} input rows")
    return np.array(out, dtype=np.int64)


def write_predictions(path, schema, predictions) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([PREDICTION_COLUMN])
        writer.writerows([schema.label_classes[p]] for p in predictions)


def cmd_anonymize(args) -> int:
    schema = _schema(args.schema)
    data = _load(args.input, schema)
    qi = _qi(args, schema)
    if args.k > len(data):
        raise UsageError(f"--k {args.k} exceeds the {len(data)} input rows")
    labels = None
    source = MODEL_PREDICTIONS
    if args.use_true_labels:
        source = TRUE_LABELS
    elif args.labels_from:
        labels = read_predictions(args.labels_from, schema, len(data))
    else:
        model = _model(args.model)
        try:
            labels = model.predict(learners.encode_for(model, data))
        except (LayoutError, KeyError) as exc:
            raise UsageError(f"--model does not fit this schema: {exc}") from None
    config = AnonymizationConfig(args.k, qi, source, args.criterion, args.seed)
    anon, tree = anonymize(data, labels, config)
    write_csv(anon, args.output)
    if args.tree_output:
        _write_json(args.tree_output, tree.to_dict())
    if args.report:
        _write_json(args.report, verify_k_anonymity(anon, qi, args.k).to_dict())
    logger.info("wrote %d rows in %d groups to %s", len(anon), len(tree.leaves), args.output)
    return 0


def cmd_mondrian(args) -> int:
    schema = _schema(args.schema)
    data = _load(args.input, schema)
    qi = _qi(args, schema)
    if args.k > len(data):
        raise UsageError(f"--k {args.k} exceeds the {len(data)} input rows")
    anon = mondrian_anonymize(data, qi, args.k)
    write_csv(anon, args.output)
    if args.report:
        _write_json(args.report, verify_k_anonymity(anon, qi, args.k).to_dict())
    return 0


def cmd_train(args) -> int:
    if bool(args.predict_input) != bool(args.predictions_out):
        raise UsageError("--predict-input and --predictions-out go together")
    schema = _schema(args.schema)
    data = _load(args.input, schema)
    config = LEARNER_PRESETS[args.learner].replace(seed=args.seed)
    model = learners.fit(config, one_hot_encode(data), data.labels, schema.n_classes)
    learners.save_model(model, args.output)
    if args.predict_input:
        target = _load(args.predict_input, schema)
        write_predictions(args.predictions_out, schema, model.predict(learners.encode_for(model, target)))
    if args.report:
        _write_json(args.report, {"learner": args.learner, "train_accuracy": learners.accuracy(model, data)})
    return 0


def cmd_attack_membership(args) -> int:
    schema = _schema(args.schema)
    model = _model(args.model)
    members = _load(args.members, schema)
    non_members = _load(args.non_members, schema)
    # both files number their rows from 0; the attack only needs them distinct
    non_members = non_members.with_row_ids(non_members.row_ids + len(members))
    config = MembershipAttackConfig(
        attack_model=LEARNER_PRESETS[args.learner].replace(seed=args.seed),
        method=args.method,
        sort_scores=not args.unsorted_scores,
        seed=args.seed,
    )
    _write_json(args.report, membership_attack(model, members, non_members, config).to_dict())
    return 0


def cmd_attack_attribute(args) -> int:
    schema = _schema(args.schema)
    model = _model(args.model)
    data = _load(args.input, schema)
    if args.secret not in schema.names:
        raise UsageError(f"--secret: unknown feature {args.secret!r}")
    result = attribute_attack(model, data, args.secret, AttributeAttackConfig(args.max_records, args.seed))
    _write_json(args.report, result.to_dict())
    return 0


def cmd_verify(args) -> int:
    schema = _schema(args.schema)
    data = _load(args.input, schema)
    report = verify_k_anonymity(data, _qi(args, schema), args.k)
    doc = report.to_dict()
    if args.report:
        _write_json(args.report, doc)
    print(json.dumps(doc, sort_keys=True, indent=2))
    if not report.passed:
        print(f"{args.input}: not {args.k}-anonymous (smallest group {report.min_group_size})", file=sys.stderr)
        return 1
    return 0


def cmd_experiment(args) -> int:
    config_path = Path(args.config)
    config = load_config(config_path)
    report = Path(args.report) if args.report else config_path.with_name(config_path.stem + ".report.jsonl")
    plot = Path(args.plot_data) if args.plot_data else report.with_name(report.name.split(".")[0] + ".plot.csv")
    reports = run_experiment(config)
    write_reports(reports, report)
    write_plot_data(reports, plot)
    logger.info("wrote %d report rows to %s", len(reports), report)
    return 0


def cmd_split(args) -> int:
    schema = _schema(args.schema)
    data = _load(args.input, schema)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for i, part in enumerate(split(data, args.fractions, args.seed), start=1):
        write_csv(part, out / f"split{i}.csv")
    return 0


COMMANDS = {
    "anonymize": cmd_anonymize,
    "mondrian": cmd_mondrian,
    "train": cmd_train,
    "attack-membership": cmd_attack_membership,
    "attack-attribute": cmd_attack_attribute,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
    "split": cmd_split,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, SchemaError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report, do not trace, for batch users
        logger.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
