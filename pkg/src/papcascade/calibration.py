"""Validation-split decision-threshold selection.

A decision function is [p >= t]. Distinct decision functions correspond to
cuts between consecutive distinct probability values, so the candidate set
is {0} + midpoints of consecutive distinct sorted probabilities + {1};
sweeping it with cumulative counts finds the exact global maximum of the
objective in O(n log n). Among equal-scoring thresholds the smallest is
returned (most sensitive toward the positive class).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .tables import Stage


class Objective(enum.Enum):
    """What the sweep maximizes, all induced by the same [p >= t] rule."""

    F1_POSITIVE = "f1_positive"
    F1_NEGATIVE = "f1_negative"
    MACRO_F1 = "macro_f1"


@dataclass(frozen=True)
class ThresholdCalibration:
    """A fold/stage decision threshold and the validation score it achieved."""

    fold_id: int
    stage: Stage
    threshold: float
    achieved_score: float
    objective: Objective

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise DataError(f"threshold {self.threshold!r} outside [0, 1]")
        if not 0.0 <= self.achieved_score <= 100.0:
            raise DataError(f"achieved score {self.achieved_score!r} outside [0, 100]")


def _objective_values(
    tp: np.ndarray, fp: np.ndarray, fn: np.ndarray, tn: np.ndarray, objective: Objective
) -> np.ndarray:
    """Percent score of the objective for aligned count arrays."""
    with np.errstate(invalid="ignore", divide="ignore"):
        f1_pos = np.where(2 * tp + fp + fn > 0, 2 * tp / (2 * tp + fp + fn), 0.0)
        f1_neg = np.where(2 * tn + fn + fp > 0, 2 * tn / (2 * tn + fn + fp), 0.0)
    if objective is Objective.F1_POSITIVE:
        frac = f1_pos
    elif objective is Objective.F1_NEGATIVE:
        frac = f1_neg
    else:
        frac = (f1_pos + f1_neg) / 2.0
    return 100.0 * frac


def candidate_thresholds(probs: Sequence[float] | np.ndarray) -> np.ndarray:
    """Ascending candidate set: 0, midpoints of distinct values, 1."""
    distinct = np.unique(np.asarray(probs, dtype=np.float64))
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate(([0.0], mids, [1.0]))


def evaluate_threshold(
    probs: Sequence[float] | np.ndarray,
    truth: Sequence[bool] | np.ndarray,
    threshold: float,
    objective: Objective,
) -> float:
    """Score (percent) of the [p >= threshold] rule on this data."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(truth, dtype=bool)
    pred = p >= threshold
    tp = float(np.sum(pred & y))
    fp = float(np.sum(pred & ~y))
    fn = float(np.sum(~pred & y))
    tn = float(np.sum(~pred & ~y))
    return float(
        _objective_values(
            np.array([tp]), np.array([fp]), np.array([fn]), np.array([tn]), objective
        )[0]
    )


def sweep_threshold(
    probs: Sequence[float] | np.ndarray,
    truth: Sequence[bool] | np.ndarray,
    objective: Objective = Objective.F1_POSITIVE,
    *,
    fold_id: int = 1,
    stage: Stage = Stage.STAGE1,
) -> ThresholdCalibration:
    """Find the threshold maximizing the objective on validation data.

    Requires at least one positive and one negative example; deterministic
    (equal inputs give bit-equal results).
    """
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(truth, dtype=bool)
    if p.shape != y.shape or p.ndim != 1 or len(p) == 0:
        raise DataError("probs and truth must be equal-length non-empty 1-D sequences")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise DataError("probabilities must lie in [0, 1]")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("validation data is single-class; threshold sweep is undefined")

    order = np.argsort(p, kind="stable")
    p_sorted = p[order]
    y_sorted = y[order]

    cands = candidate_thresholds(p_sorted)
    # first index with p >= t, for each candidate
    starts = np.searchsorted(p_sorted, cands, side="left")
    pos_suffix = np.concatenate(
        (np.cumsum(y_sorted[::-1])[::-1], [0])
    ).astype(np.float64)
    n = len(p_sorted)
    predicted_pos = (n - starts).astype(np.float64)
    tp = pos_suffix[starts]
    fp = predicted_pos - tp
    fn = n_pos - tp
    tn = n_neg - fp
    scores = _objective_values(tp, fp, fn, tn, objective)
    best = int(np.argmax(scores))  # first (= smallest) maximizer
    return ThresholdCalibration(
        fold_id=fold_id,
        stage=stage,
        threshold=float(cands[best]),
        achieved_score=float(scores[best]),
        objective=objective,
    )


def apply_threshold(prob: float, cal: ThresholdCalibration) -> bool:
    """Inclusive decision rule: positive iff prob >= threshold."""
    return prob >= cal.threshold
