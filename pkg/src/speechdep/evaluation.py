"""Speaker-level scoring: confusion counts, per-class precision/recall/F1,
speaker-disjoint stratified k-fold splits, and a cross-validation harness
that pools every fold's test predictions into one concatenated list before
computing the headline metrics.

Class 1 is the positive class for its own metrics and class 0 for its own,
so each class gets a precision, recall and F1 with itself as the target.
A zero denominator yields 0.0 and the metric name is recorded in the
`undefined` field instead of raising.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import EnsembleConfig, PredictionSet, fuse
from .network import NetworkConfig, NetworkParams, forward_batch
from .trainer import TrainConfig, TrainHistory, train_ensemble


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict[int, ClassMetrics]
    n_scored: int


def confusion(truth, predicted) -> ConfusionCounts:
    """Counts with class 1 as positive; both mappings must share one key set."""
    if set(truth) != set(predicted):
        missing = sorted(set(truth) ^ set(predicted))
        raise ValueError(f"truth and prediction keys differ: {missing[:5]}")
    if not truth:
        raise ValueError("no speakers to score")
    tp = fp = tn = fn = 0
    for key, actual in truth.items():
        pred = predicted[key]
        if actual not in (0, 1) or pred not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got {actual!r}/{pred!r} for {key!r}")
        if actual == 1:
            tp, fn = (tp + 1, fn) if pred == 1 else (tp, fn + 1)
        else:
            tn, fp = (tn + 1, fp) if pred == 0 else (tn, fp + 1)
    return ConfusionCounts(tp, fp, tn, fn)


def _ratio(num: int, den: int, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def _class_metrics(tp: int, fp: int, fn: int) -> ClassMetrics:
    flags: list[str] = []
    precision = _ratio(tp, tp + fp, "precision", flags)
    recall = _ratio(tp, tp + fn, "recall", flags)
    if precision + recall == 0.0:
        flags.append("f1")
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return ClassMetrics(precision, recall, f1, tuple(flags))


def metrics(conf: ConfusionCounts) -> MetricsReport:
    if conf.total == 0:
        raise ValueError("cannot score an empty confusion table")
    return MetricsReport(
        accuracy=(conf.tp + conf.tn) / conf.total,
        per_class={
            # class 0 metrics treat label 0 as the positive class
            0: _class_metrics(conf.tn, conf.fn, conf.fp),
            1: _class_metrics(conf.tp, conf.fp, conf.fn),
        },
        n_scored=conf.total,
    )


@dataclass
class FoldPlan:
    folds: list[list[str]]  # validation speakers per fold, each sorted

    @property
    def k(self) -> int:
        return len(self.folds)

    def val_speakers(self, fold: int) -> list[str]:
        return list(self.folds[fold])

    def train_speakers(self, fold: int) -> list[str]:
        held_out = set(self.folds[fold])
        return sorted(s for f in self.folds for s in f if s not in held_out)


def kfold_split(labels, k: int, seed: int = 0) -> FoldPlan:
    """Class-stratified partition: seeded shuffle within class, round-robin."""
    if k < 2:
        raise ValueError("k must be >= 2 for a fold plan")
    bad = {s: y for s, y in labels.items() if y not in (0, 1)}
    if bad:
        raise ValueError(f"labels must be 0 or 1: {sorted(bad)[:5]}")
    for label in (0, 1):
        members = [s for s, y in labels.items() if y == label]
        if k > len(members):
            raise ValueError(f"k={k} exceeds the {len(members)} speakers of class {label}")
    rng = np.random.default_rng(seed)
    folds: list[list[str]] = [[] for _ in range(k)]
    for label in (0, 1):
        members = sorted(s for s, y in labels.items() if y == label)
        for i, idx in enumerate(rng.permutation(len(members))):
            folds[i % k].append(members[idx])
    return FoldPlan([sorted(f) for f in folds])


def predict_speaker_probs(
    params: NetworkParams, net_cfg: NetworkConfig, features, batch_size: int = 256
) -> np.ndarray:
    """Class-1 probabilities aligned with the given feature list."""
    probs = []
    for lo in range(0, len(features), batch_size):
        chunk = np.stack(
            [np.asarray(f.values, dtype=np.float64) for f in features[lo : lo + batch_size]]
        )
        probs.append(forward_batch(params, chunk, net_cfg).probs)
    return np.concatenate(probs) if probs else np.empty(0)


def speaker_labels(features) -> dict[str, int]:
    out: dict[str, int] = {}
    for f in features:
        prior = out.setdefault(f.speaker_id, f.label)
        if prior != f.label:
            raise ValueError(f"speaker {f.speaker_id} carries conflicting labels")
    return out


def prediction_set_for(
    machine: int, params: NetworkParams, net_cfg: NetworkConfig, features, threshold: float = 0.5
) -> PredictionSet:
    probs = predict_speaker_probs(params, net_cfg, features)
    return PredictionSet.from_samples(
        machine,
        [f.speaker_id for f in features],
        [f.crop_index for f in features],
        probs,
        threshold,
    )


@dataclass
class CrossValResult:
    fold_reports: list[MetricsReport]
    pooled_report: MetricsReport
    fold_validation: list[list[str]]
    fold_predictions: list[dict[str, int]]
    histories: list[list[TrainHistory]] = field(default_factory=list)


def cross_validate(
    train_features,
    test_features,
    net_cfg: NetworkConfig,
    train_cfg: TrainConfig,
    ens_cfg: EnsembleConfig,
    k: int = 5,
    seed: int = 0,
) -> CrossValResult:
    """Train per fold on the non-held-out speakers, score the fixed test set.

    Every fold's test-speaker predictions are concatenated, each test speaker
    contributing k rows, and the pooled list is scored against duplicated
    truth labels. k=1 degenerates to a single train-on-everything pass with
    no validation subset.
    """
    if not train_features or not test_features:
        raise ValueError("need non-empty train and test feature sets")
    train_labels = speaker_labels(train_features)
    test_truth = speaker_labels(test_features)

    if k == 1:
        val_sets: list[list[str]] = [[]]
    else:
        val_sets = kfold_split(train_labels, k, seed).folds

    fold_reports = []
    fold_predictions = []
    histories = []
    pooled_truth: dict[tuple[int, str], int] = {}
    pooled_pred: dict[tuple[int, str], int] = {}

    for fold, held_out in enumerate(val_sets):
        held = set(held_out)
        fold_train = [f for f in train_features if f.speaker_id not in held]
        fold_val = [f for f in train_features if f.speaker_id in held] or None
        params_list, hist_list = train_ensemble(
            fold_train, net_cfg, train_cfg, ens_cfg.machines, val_features=fold_val
        )
        sets = [
            prediction_set_for(m, params, net_cfg, test_features, ens_cfg.threshold)
            for m, params in enumerate(params_list)
        ]
        fused = fuse(sets, ens_cfg)
        fold_reports.append(metrics(confusion(test_truth, fused)))
        fold_predictions.append(fused)
        histories.append(hist_list)
        for speaker, label in test_truth.items():
            pooled_truth[(fold, speaker)] = label
            pooled_pred[(fold, speaker)] = fused[speaker]

    pooled_report = metrics(confusion(pooled_truth, pooled_pred))
    return CrossValResult(fold_reports, pooled_report, val_sets, fold_predictions, histories)


def write_metrics_csv(path, fold_reports, pooled_report) -> None:
    """Rows `scope,class,accuracy,precision,recall,f1`, scope fold_<i> or pooled."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scope", "class", "accuracy", "precision", "recall", "f1"])
        scoped = [(f"fold_{i}", r) for i, r in enumerate(fold_reports)]
        scoped.append(("pooled", pooled_report))
        for scope, report in scoped:
            for cls in (0, 1):
                cm = report.per_class[cls]
                writer.writerow(
                    [
                        scope,
                        cls,
                        format(report.accuracy, ".10g"),
                        format(cm.precision, ".10g"),
                        format(cm.recall, ".10g"),
                        format(cm.f1, ".10g"),
                    ]
                )
