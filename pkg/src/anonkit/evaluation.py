"""Anonymity verification, experiment sweeps and report files.

An experiment config is a JSON object::

    {
      "name": "adult-dt",                 # optional, defaults to the dataset file stem
      "dataset": "data/adult.csv",        # paths are relative to the config file
      "schema": "data/adult.schema.json",
      "qi_preset": "adult8",              # or "qi_list": [...]
      "ks": [10, 100],
      "methods": ["AG", "mondrian"],
      "learners": ["dt"],                 # preset names or {"preset": ..., overrides}
      "label_source": "model_predictions",
      "criterion": "gini",
      "attacks": {"membership": {...}, "attribute": {"secret": "social"}},
      "seeds": [0, 1, 2],                 # or "seed": 0
      "subsample": 10000,                 # null or "full_size": true for every row
      "fractions": [0.4, 0.4, 0.2],
      "feature_selection": null,
      "output_dir": "out"                 # optional, keeps the anonymized CSVs
    }
"""
from __future__ import annotations

import csv
import json
import logging
import tempfile
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from anonkit import learners
from anonkit.anonymizer import LABEL_SOURCES, MODEL_PREDICTIONS, TRUE_LABELS, AnonymizationConfig, anonymize, normalize_criterion
from anonkit.attacks import (
    AttributeAttackConfig,
    MembershipAttackConfig,
    attribute_attack,
    default_attack_model,
    membership_attack,
)
from anonkit.mondrian import mondrian_anonymize
from anonkit.presets import QI_PRESETS, learner_from_spec
from anonkit.tabular import (
    Dataset,
    QuasiIdentifierSet,
    load_csv,
    load_schema,
    one_hot_encode,
    project,
    split,
    subsample,
    write_csv,
)

logger = logging.getLogger(__name__)

AG = "AG"
MONDRIAN = "mondrian"
METHODS = (AG, MONDRIAN)
DEFAULT_SUBSAMPLE = 10000


class ConfigError(ValueError):
    """Raised with every problem found in an experiment config."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid experiment config:\n  " + "\n  ".join(self.problems))


class VerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class KAnonymityReport:
    k_requested: int
    min_group_size: int
    group_count: int
    # (QI value tuple, count) for every group smaller than k, smallest first
    violating_tuples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.min_group_size >= self.k_requested

    def to_dict(self) -> dict:
        return {
            "k_requested": self.k_requested,
            "min_group_size": self.min_group_size,
            "group_count": self.group_count,
            "violating_tuples": [[list(t), c] for t, c in self.violating_tuples],
            "pass": self.passed,
        }


def _qi_groups(data: Dataset, qi) -> tuple[Counter, list[int]]:
    qi = qi if isinstance(qi, QuasiIdentifierSet) else QuasiIdentifierSet.of(data.schema, qi)
    if not qi.names:
        raise ValueError("quasi-identifier set is empty")
    cols = qi.indices(data.schema)
    return Counter(map(tuple, data.values[:, cols].tolist())), cols


def verify_k_anonymity(data: Dataset, qi, k: int) -> KAnonymityReport:
    """Group rows by their QI value tuple and check every group has >= k rows."""
    groups, cols = _qi_groups(data, qi)
    if not groups:
        return KAnonymityReport(int(k), 0, 0, [])
    small = sorted((c, t) for t, c in groups.items() if c < k)
    violating = [(tuple(data.format_value(j, v) for j, v in zip(cols, t)), c) for c, t in small]
    return KAnonymityReport(int(k), min(groups.values()), len(groups), violating)


@dataclass(frozen=True)
class ClassStats:
    group_count: int
    min_size: int
    mean_size: float
    max_size: int

    def to_dict(self) -> dict:
        return {"group_count": self.group_count, "min_size": self.min_size, "mean_size": self.mean_size, "max_size": self.max_size}


def equivalence_class_stats(data: Dataset, qi) -> ClassStats:
    groups, _ = _qi_groups(data, qi)
    sizes = np.array(list(groups.values()) or [0])
    return ClassStats(len(groups), int(sizes.min()), float(sizes.mean()), int(sizes.max()))


@dataclass
class EvaluationReport:
    dataset: str
    learner: str
    learner_kind: str
    method: str
    qi: list[str]
    k: int
    seed: int
    label_source: str
    feature_selection: int | None
    baseline_accuracy: float
    ag_accuracy: float | None
    mondrian_accuracy: float | None
    kanonymity: KAnonymityReport
    classes: ClassStats
    attacks: dict | None = None
    # wall-clock seconds per stage; logged, never written, so reruns stay byte-identical
    timings: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.ag_accuracy if self.method == AG else self.mondrian_accuracy

    @property
    def sort_key(self):
        return (self.dataset, self.learner, self.method, self.k, self.seed)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "learner": self.learner,
            "learner_kind": self.learner_kind,
            "method": self.method,
            "qi": list(self.qi),
            "k": self.k,
            "seeds": [self.seed],
            "label_source": self.label_source,
            "feature_selection": self.feature_selection,
            "baseline_accuracy": self.baseline_accuracy,
            "ag_accuracy": self.ag_accuracy,
            "mondrian_accuracy": self.mondrian_accuracy,
            "kanonymity": self.kanonymity.to_dict(),
            "equivalence_classes": self.classes.to_dict(),
            "attacks": self.attacks,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: Path
    schema: Path
    qi: tuple[str, ...]
    ks: tuple[int, ...]
    methods: tuple[str, ...]
    learners: tuple  # (name, LearnerConfig) pairs
    label_source: str = MODEL_PREDICTIONS
    criterion: str = "gini"
    seeds: tuple[int, ...] = (0,)
    subsample: int | None = DEFAULT_SUBSAMPLE
    fractions: tuple[float, float, float] = (0.4, 0.4, 0.2)
    feature_selection: int | None = None
    membership: MembershipAttackConfig | None = None
    attribute: tuple[str, AttributeAttackConfig] | None = None
    output_dir: Path | None = None


_KNOWN_KEYS = {
    "name", "dataset", "schema", "qi_preset", "qi_list", "ks", "methods", "learners", "label_source",
    "criterion", "attacks", "seed", "seeds", "subsample", "full_size", "fractions", "feature_selection",
    "output_dir",
}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def parse_config(doc: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Validate a config object, collecting every problem before raising."""
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])
    base = Path(base_dir)
    problems: list[str] = []
    for key in sorted(set(doc) - _KNOWN_KEYS):
        problems.append(f"unknown key {key!r}")

    schema = None
    paths = {}
    for key in ("dataset", "schema"):
        if not isinstance(doc.get(key), str):
            problems.append(f"{key!r} must be a path string")
            continue
        paths[key] = (base / doc[key]).resolve()
        if not paths[key].is_file():
            problems.append(f"{key} file not found: {paths[key]}")
    if "schema" in paths and paths["schema"].is_file():
        try:
            schema = load_schema(paths["schema"])
        except (ValueError, OSError) as exc:
            problems.append(f"schema: {exc}")

    qi: tuple[str, ...] = ()
    if ("qi_preset" in doc) == ("qi_list" in doc):
        problems.append("give exactly one of 'qi_preset' and 'qi_list'")
    elif "qi_preset" in doc:
        if doc["qi_preset"] not in QI_PRESETS:
            problems.append(f"unknown qi_preset {doc['qi_preset']!r}")
        else:
            qi = QI_PRESETS[doc["qi_preset"]]
    elif not (isinstance(doc["qi_list"], list) and doc["qi_list"] and all(isinstance(n, str) for n in doc["qi_list"])):
        problems.append("'qi_list' must be a nonempty list of feature names")
    else:
        qi = tuple(doc["qi_list"])
    if schema is not None and qi:
        missing = [n for n in qi if n not in schema.names]
        if missing:
            problems.append(f"QI features not in schema: {', '.join(missing)}")

    ks = doc.get("ks")
    if not (isinstance(ks, list) and ks and all(_is_int(k) and k >= 1 for k in ks)):
        problems.append("'ks' must be a nonempty list of integers >= 1")
        ks = []

    methods = doc.get("methods", list(METHODS))
    if not (isinstance(methods, list) and methods and all(m in METHODS for m in methods)):
        problems.append(f"'methods' must be a nonempty list drawn from {list(METHODS)}")
        methods = []

    resolved = []
    specs = doc.get("learners")
    if not (isinstance(specs, list) and specs):
        problems.append("'learners' must be a nonempty list")
        specs = []
    for spec in specs:
        try:
            resolved.append(learner_from_spec(spec))
        except (ValueError, TypeError) as exc:
            problems.append(f"learner {spec!r}: {exc}")
    names = [n for n, _ in resolved]
    if len(set(names)) != len(names):
        problems.append("learner names must be unique")

    label_source = doc.get("label_source", MODEL_PREDICTIONS)
    if label_source not in LABEL_SOURCES:
        problems.append(f"'label_source' must be one of {list(LABEL_SOURCES)}")

    criterion = doc.get("criterion", "gini")
    try:
        criterion = normalize_criterion(criterion)
    except ValueError as exc:
        problems.append(str(exc))

    if "seed" in doc and "seeds" in doc:
        problems.append("give at most one of 'seed' and 'seeds'")
    seeds = doc["seeds"] if "seeds" in doc else [doc.get("seed", 0)]
    if not (isinstance(seeds, list) and seeds and all(_is_int(s) and s >= 0 for s in seeds)):
        problems.append("seeds must be non-negative integers")
        seeds = []

    size = None if doc.get("full_size", False) else doc.get("subsample", DEFAULT_SUBSAMPLE)
    if not isinstance(doc.get("full_size", False), bool):
        problems.append("'full_size' must be true or false")
    if size is not None and not (_is_int(size) and size >= 1):
        problems.append("'subsample' must be a positive integer or null")

    fractions = doc.get("fractions", [0.4, 0.4, 0.2])
    if not (
        isinstance(fractions, list)
        and len(fractions) == 3
        and all(isinstance(f, (int, float)) and not isinstance(f, bool) and f > 0 for f in fractions)
        and abs(sum(fractions) - 1.0) <= 1e-9
    ):
        problems.append("'fractions' must be three positive numbers summing to 1")

    fs = doc.get("feature_selection")
    if fs is not None and not (_is_int(fs) and fs >= 1):
        problems.append("'feature_selection' must be a positive integer or null")

    membership = attribute = None
    attacks = doc.get("attacks") or {}
    if not isinstance(attacks, dict):
        problems.append("'attacks' must be an object")
        attacks = {}
    for key in sorted(set(attacks) - {"membership", "attribute"}):
        problems.append(f"unknown attack {key!r}")
    if "membership" in attacks:
        m = attacks["membership"] or {}
        try:
            model = learner_from_spec(m["learner"])[1] if "learner" in m else default_attack_model()
            membership = MembershipAttackConfig(
                attack_model=model, method=m.get("method", "model"), sort_scores=bool(m.get("sort_scores", True))
            )
        except (ValueError, TypeError, KeyError) as exc:
            problems.append(f"membership attack: {exc}")
    if "attribute" in attacks:
        a = attacks["attribute"] or {}
        secret = a.get("secret")
        if not isinstance(secret, str):
            problems.append("attribute attack needs a 'secret' feature name")
        elif schema is not None:
            if secret not in schema.names:
                problems.append(f"attribute attack secret {secret!r} is not in the schema")
            elif not schema.feature(secret).is_categorical:
                problems.append(f"attribute attack secret {secret!r} must be categorical")
        max_records = a.get("max_records")
        if max_records is not None and not (_is_int(max_records) and max_records >= 1):
            problems.append("attribute attack 'max_records' must be a positive integer or null")
        attribute = (secret, AttributeAttackConfig(max_records=max_records))

    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        problems.append("'output_dir' must be a path string")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        name=doc.get("name") or paths["dataset"].stem,
        dataset=paths["dataset"],
        schema=paths["schema"],
        qi=qi,
        ks=tuple(ks),
        methods=tuple(methods),
        learners=tuple(resolved),
        label_source=label_source,
        criterion=criterion,
        seeds=tuple(seeds),
        subsample=size,
        fractions=tuple(float(f) for f in fractions),
        feature_selection=fs,
        membership=membership,
        attribute=attribute,
        output_dir=(base / out).resolve() if out else None,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config {path} is not valid JSON: {exc}"]) from None
    return parse_config(doc, path.parent)


def _verify_serialized(data: Dataset, qi: QuasiIdentifierSet, k: int, path: Path) -> tuple[KAnonymityReport, ClassStats]:
    """Write the anonymized table, read it back and check the file itself."""
    write_csv(data, path)
    reloaded = load_csv(path, data.schema)
    if len(reloaded) != len(data):
        raise VerificationError(f"{path}: wrote {len(data)} rows, read back {len(reloaded)}")
    report = verify_k_anonymity(reloaded, qi, k)
    if not report.passed:
        raise VerificationError(
            f"{path} is not {k}-anonymous: smallest group has {report.min_group_size} rows "
            f"({len(report.violating_tuples)} violating groups)"
        )
    return report, equivalence_class_stats(reloaded, qi)


def _attack(cfg: ExperimentConfig, target, members: Dataset, non_members: Dataset, seed: int) -> dict:
    out = {}
    if cfg.membership is not None:
        mcfg = MembershipAttackConfig(
            attack_model=cfg.membership.attack_model.replace(seed=seed),
            method=cfg.membership.method,
            sort_scores=cfg.membership.sort_scores,
            seed=seed,
        )
        out["membership"] = membership_attack(target, members, non_members, mcfg).to_dict()
    if cfg.attribute is not None:
        secret, acfg = cfg.attribute
        if secret in target.features:
            acfg = AttributeAttackConfig(max_records=acfg.max_records, seed=seed)
            out["attribute"] = attribute_attack(target, members, secret, acfg).to_dict()
        else:
            logger.warning("attribute attack skipped: %r was dropped by feature selection", secret)
    return out


def run_experiment(config: ExperimentConfig | str | Path) -> list[EvaluationReport]:
    """Run every (seed, learner, k, method) cell and return reports in sorted order.

    Per seed and learner the data is subsampled and split once and the original
    model is trained once; each cell then anonymizes the second split, checks
    the written file, retrains and scores on the held-out split.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    schema = load_schema(cfg.schema)
    data = load_csv(cfg.dataset, schema)
    n_classes = schema.n_classes
    reports: list[EvaluationReport] = []
    with tempfile.TemporaryDirectory(prefix="anonkit-") as scratch:
        out_dir = cfg.output_dir or Path(scratch)
        out_dir.mkdir(parents=True, exist_ok=True)
        for seed in cfg.seeds:
            sub = subsample(data, cfg.subsample, seed) if cfg.subsample else data
            first, second, test = split(sub, cfg.fractions, seed)
            features = schema.names
            qi_names = list(cfg.qi)
            if cfg.feature_selection is not None:
                features = learners.select_features(one_hot_encode(first), first.labels, cfg.feature_selection)
                qi_names = [n for n in qi_names if n in features]
                if not qi_names:
                    raise VerificationError("no quasi-identifier survives feature selection")
                first, second, test = (project(d, features) for d in (first, second, test))
            qi = QuasiIdentifierSet.of(first.schema, qi_names)
            test_x = one_hot_encode(test)
            for lname, lconfig in cfg.learners:
                lconfig = lconfig.replace(seed=seed)
                t0 = time.perf_counter()
                original = learners.fit(lconfig, one_hot_encode(first), first.labels, n_classes)
                baseline = float(np.mean(original.predict(test_x) == test.labels))
                guide = second.labels if cfg.label_source == TRUE_LABELS else original.predict(one_hot_encode(second))
                base_attacks = _attack(cfg, original, first, test, seed) if (cfg.membership or cfg.attribute) else None
                logger.info("seed %d %s: baseline %.4f (%.1fs)", seed, lname, baseline, time.perf_counter() - t0)
                for k in cfg.ks:
                    for method in cfg.methods:
                        timings = {}
                        t0 = time.perf_counter()
                        if method == AG:
                            anon, _ = anonymize(second, guide, AnonymizationConfig(k, qi, cfg.label_source, cfg.criterion, seed))
                        else:
                            anon = mondrian_anonymize(second, qi, k)
                        timings["anonymize"] = time.perf_counter() - t0
                        t0 = time.perf_counter()
                        path = out_dir / f"{cfg.name}_{lname}_{method}_k{k}_s{seed}.csv"
                        kreport, stats = _verify_serialized(anon, qi, k, path)
                        timings["verify"] = time.perf_counter() - t0
                        t0 = time.perf_counter()
                        retrained = learners.fit(lconfig, one_hot_encode(anon), anon.labels, n_classes)
                        acc = float(np.mean(retrained.predict(test_x) == test.labels))
                        timings["retrain"] = time.perf_counter() - t0
                        attacks = None
                        if base_attacks is not None:
                            t0 = time.perf_counter()
                            attacks = {"before": base_attacks, "after": _attack(cfg, retrained, second, test, seed)}
                            timings["attacks"] = time.perf_counter() - t0
                        logger.info(
                            "seed %d %s %s k=%d: accuracy %.4f, %d groups (%s)",
                            seed, lname, method, k, acc, stats.group_count,
                            ", ".join(f"{s} {v:.2f}s" for s, v in timings.items()),
                        )
                        reports.append(
                            EvaluationReport(
                                dataset=cfg.name,
                                learner=lname,
                                learner_kind=lconfig.kind,
                                method=method,
                                qi=qi_names,
                                k=k,
                                seed=seed,
                                label_source=cfg.label_source,
                                feature_selection=cfg.feature_selection,
                                baseline_accuracy=baseline,
                                ag_accuracy=acc if method == AG else None,
                                mondrian_accuracy=acc if method == MONDRIAN else None,
                                kanonymity=kreport,
                                classes=stats,
                                attacks=attacks,
                                timings=timings,
                            )
                        )
    reports.sort(key=lambda r: r.sort_key)
    return reports


def write_reports(reports: list[EvaluationReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def plot_rows(reports: list[EvaluationReport]) -> list[dict]:
    """Mean and population std over seeds per (learner, method, k).

    The baseline appears as method ``baseline`` at every k so it can be drawn
    as a reference line.
    """
    groups: dict[tuple, list[float]] = {}
    baselines: dict[tuple, dict[int, float]] = {}
    for r in reports:
        groups.setdefault((r.learner, r.method, r.k), []).append(r.accuracy)
        baselines.setdefault((r.learner, "baseline", r.k), {})[r.seed] = r.baseline_accuracy
    for key, by_seed in baselines.items():
        groups[key] = [by_seed[s] for s in sorted(by_seed)]
    rows = []
    for (learner, method, k), accs in sorted(groups.items()):
        rows.append(
            {
                "method": method,
                "k": k,
                "accuracy": float(np.mean(accs)),
                "accuracy_std": float(np.std(accs)),
                "learner": learner,
                "runs": len(accs),
            }
        )
    return rows


def write_plot_data(reports: list[EvaluationReport], path: str | Path) -> None:
    rows = plot_rows(reports)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["method", "k", "accuracy", "accuracy_std", "learner", "runs"], lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "accuracy": repr(row["accuracy"]), "accuracy_std": repr(row["accuracy_std"])})
