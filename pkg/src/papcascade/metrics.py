"""Evaluation metrics: confusion matrix, F1 family, accuracy, and AUROC.

All public values are on a 0-100 percent scale. Zero-division cases
(a class never predicted or never present) resolve to 0 so macro averages
stay defined on degenerate folds. AUROC follows the Mann-Whitney
definition with ties counted half, computed from average ranks; the
complement identity auroc(s, y) + auroc(s, not y) == 100 holds exactly in
floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DataError
from .labels import FINAL_CLASSES, FinalLabel


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts[i, j] = images of true class i predicted as class j."""

    classes: tuple[FinalLabel, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        c = len(self.classes)
        if counts.shape != (c, c):
            raise DataError(f"confusion matrix shape {counts.shape} != ({c}, {c})")
        if np.any(counts < 0):
            raise DataError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(
    truth: Sequence[FinalLabel],
    pred: Sequence[FinalLabel],
    classes: tuple[FinalLabel, ...] = FINAL_CLASSES,
) -> ConfusionMatrix:
    if len(truth) != len(pred):
        raise DataError(f"length mismatch: {len(truth)} truth vs {len(pred)} predictions")
    if len(truth) == 0:
        raise DataError("cannot build a confusion matrix from zero images")
    index = {label: i for i, label in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, pred):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(classes=classes, counts=counts)


def _div(num: float, den: float) -> float:
    return num / den if den else 0.0


def _per_class_prf(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class (precision, recall, f1) as fractions in [0, 1]."""
    counts = cm.counts
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    precision = np.array([_div(t, t + f) for t, f in zip(tp, fp)])
    recall = np.array([_div(t, t + f) for t, f in zip(tp, fn)])
    f1 = np.array([_div(2 * t, 2 * t + p + n) for t, p, n in zip(tp, fp, fn)])
    return precision, recall, f1


def per_class_f1(cm: ConfusionMatrix) -> dict[FinalLabel, float]:
    """F1 per class, percent; 0/0 evaluates to 0."""
    _, _, f1 = _per_class_prf(cm)
    return {label: 100.0 * v for label, v in zip(cm.classes, f1)}


def macro_metrics(cm: ConfusionMatrix) -> dict[str, float]:
    """Unweighted class means of P/R/F1 plus plain accuracy, percent."""
    precision, recall, f1 = _per_class_prf(cm)
    return {
        "macro_f1": 100.0 * float(np.mean(f1)),
        "macro_precision": 100.0 * float(np.mean(precision)),
        "macro_recall": 100.0 * float(np.mean(recall)),
        "accuracy": 100.0 * _div(float(np.trace(cm.counts)), float(cm.total)),
    }


def weighted_f1(cm: ConfusionMatrix) -> float:
    """Support-weighted mean of per-class F1, percent."""
    _, _, f1 = _per_class_prf(cm)
    support = cm.counts.sum(axis=1).astype(np.float64)
    total = support.sum()
    if total == 0:
        raise DataError("empty confusion matrix")
    return 100.0 * float(np.dot(support / total, f1))


def auroc_binary(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Rank-based AUROC, percent; ties between classes count half.

    Equals (wins + 0.5 * ties) / (n_pos * n_neg) over all positive-negative
    score pairs, evaluated in O(n log n) through average ranks.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError("scores and labels must be equal-length 1-D sequences")
    n_pos = int(y.sum())
    n_neg = int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC needs at least one positive and one negative")
    ranks = rankdata(s, method="average")
    # Average ranks are multiples of 1/2, so 2*sum is an exact integer.
    num2 = int(round(2.0 * float(ranks[y].sum()))) - n_pos * (n_pos + 1)
    den2 = 2 * n_pos * n_neg
    # Evaluate the smaller side and complement the other so that the two
    # label orientations sum to exactly 100.0.
    if 2 * num2 <= den2:
        return (100.0 * num2) / den2
    return 100.0 - (100.0 * (den2 - num2)) / den2


def auroc_macro_ovr(
    scores: np.ndarray,
    truth: Sequence[FinalLabel],
    classes: tuple[FinalLabel, ...] = FINAL_CLASSES,
) -> float:
    """Macro one-vs-rest AUROC over composed per-class scores, percent."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != len(classes):
        raise DataError(f"scores must be (n, {len(classes)})")
    if s.shape[0] != len(truth):
        raise DataError("scores and truth lengths differ")
    values = []
    for j, label in enumerate(classes):
        is_label = np.array([t is label for t in truth], dtype=bool)
        if not is_label.any() or is_label.all():
            raise DataError(f"class {label.value!r} missing from truth (or is the only one)")
        values.append(auroc_binary(s[:, j], is_label))
    return float(np.mean(values))


@dataclass(frozen=True)
class FoldMetrics:
    """All reported quantities for one method on one fold's test set."""

    macro_f1: float
    weighted_f1: float
    precision: float
    recall: float
    auroc: float
    accuracy: float
    per_class_f1: Mapping[FinalLabel, float]
    confusion: ConfusionMatrix

    SCALARS = ("macro_f1", "weighted_f1", "precision", "recall", "auroc", "accuracy")

    def scalar_values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.SCALARS}


def fold_metrics(
    truth: Sequence[FinalLabel],
    pred: Sequence[FinalLabel],
    composed_scores: np.ndarray,
    classes: tuple[FinalLabel, ...] = FINAL_CLASSES,
) -> FoldMetrics:
    cm = confusion_matrix(truth, pred, classes)
    macro = macro_metrics(cm)
    return FoldMetrics(
        macro_f1=macro["macro_f1"],
        weighted_f1=weighted_f1(cm),
        precision=macro["macro_precision"],
        recall=macro["macro_recall"],
        auroc=auroc_macro_ovr(composed_scores, truth, classes),
        accuracy=macro["accuracy"],
        per_class_f1=per_class_f1(cm),
        confusion=cm,
    )


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float

    def format(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f}"


def aggregate_values(values: Sequence[float]) -> Aggregate:
    """Mean and sample standard deviation (k-1 denominator) over folds."""
    if len(values) < 2:
        raise DataError(f"aggregation needs >= 2 folds, got {len(values)}")
    arr = np.asarray(values, dtype=np.float64)
    return Aggregate(mean=float(arr.mean()), std=float(arr.std(ddof=1)))


def aggregate_folds(
    per_fold: Mapping[int, Mapping[str, float]]
) -> dict[str, Aggregate]:
    """Aggregate each metric key across folds."""
    folds = sorted(per_fold)
    if len(folds) < 2:
        raise DataError(f"aggregation needs >= 2 folds, got {len(folds)}")
    keys = list(per_fold[folds[0]])
    return {
        key: aggregate_values([per_fold[f][key] for f in folds]) for key in keys
    }
