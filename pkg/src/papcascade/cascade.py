"""Two-stage ensemble mechanics: model averaging, fold votes, composition.

Stage 1 thresholds the fold-averaged rubbish probability; images voted
suitable get a stage-2 healthy-vs-unhealthy decision from the fold-averaged
healthy probability. Cross-fold majority voting combines the per-fold
decisions into the final label; a 3-component score vector is composed from
the two stage probabilities for rank metrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .calibration import ThresholdCalibration
from .errors import CoverageError, DataError, VoteTieError
from .labels import FinalLabel, Stage1Label, Stage2Label
from .tables import PredictionRecord, PredictionTable, Stage

#: Default tie-break rules: prefer the clinically conservative side.
STAGE1_TIE_DEFAULT = Stage1Label.SUITABLE
STAGE2_TIE_DEFAULT = Stage2Label.UNHEALTHY


@dataclass(frozen=True)
class FoldEnsembleScore:
    """Model-averaged probability vector for one (image, fold, stage)."""

    image_id: str
    fold_id: int
    stage: Stage
    p: tuple[float, ...]
    m: int


@dataclass(frozen=True)
class FoldDecision:
    """Thresholded decision of a single fold for a single image."""

    image_id: str
    fold_id: int
    stage: Stage
    decision: Stage1Label | Stage2Label


@dataclass(frozen=True)
class CascadeOutput:
    """Final voted label plus the evidence that produced it."""

    image_id: str
    final: FinalLabel
    votes1: tuple[Stage1Label, ...]
    votes2: tuple[Stage2Label, ...] | None
    composed_scores: tuple[float, float, float] | None
    p_rubbish: float | None = None


def ensemble_average(records: Sequence[PredictionRecord]) -> FoldEnsembleScore:
    """Componentwise arithmetic mean over the models of one image/fold/stage."""
    if not records:
        raise DataError("cannot average an empty set of predictions")
    first = records[0]
    seen_models = set()
    for rec in records:
        if (rec.image_id, rec.fold_id, rec.stage) != (
            first.image_id,
            first.fold_id,
            first.stage,
        ):
            raise DataError("records mix different (image, fold, stage) keys")
        if rec.model_id in seen_models:
            raise DataError(f"model {rec.model_id!r} appears twice in the average")
        seen_models.add(rec.model_id)
    # Fixed summation order (sorted by model) keeps the mean bit-identical
    # under permutation of the inputs.
    ordered = sorted(records, key=lambda r: r.model_id)
    stacked = np.array([rec.p for rec in ordered], dtype=np.float64)
    mean = stacked.mean(axis=0)
    return FoldEnsembleScore(
        image_id=first.image_id,
        fold_id=first.fold_id,
        stage=first.stage,
        p=tuple(float(v) for v in mean),
        m=len(records),
    )


def majority_vote(votes, tie_break=None):
    """Label predicted most often; ties resolve to ``tie_break`` or raise."""
    votes = list(votes)
    if not votes:
        raise DataError("majority vote over zero votes")
    counts: dict = {}
    for vote in votes:
        counts[vote] = counts.get(vote, 0) + 1
    top = max(counts.values())
    winners = [label for label, count in counts.items() if count == top]
    if len(winners) == 1:
        return winners[0]
    if tie_break is None:
        raise VoteTieError(f"vote tied {top}-{top} with no tie-break rule")
    if tie_break not in winners:
        raise VoteTieError(f"tie-break label {tie_break!r} not among tied labels")
    return tie_break


def compose_scores(p_rubbish: float, p_healthy: float) -> tuple[float, float, float]:
    """(p_rubbish, (1-p_r)*p_h, (1-p_r)*(1-p_h)); sums to 1."""
    if not (0.0 <= p_rubbish <= 1.0 and 0.0 <= p_healthy <= 1.0):
        raise DataError("composed scores need probabilities in [0, 1]")
    rest = 1.0 - p_rubbish
    return (p_rubbish, rest * p_healthy, rest * (1.0 - p_healthy))


def cascade_predict(
    image_id: str,
    votes1: Sequence[Stage1Label],
    votes2: Sequence[Stage2Label] | None = None,
    *,
    p_rubbish: float | None = None,
    p_healthy: float | None = None,
    stage1_tie: Stage1Label = STAGE1_TIE_DEFAULT,
    stage2_tie: Stage2Label = STAGE2_TIE_DEFAULT,
) -> CascadeOutput:
    """Combine per-fold decisions into one final label.

    Stage-2 votes are consulted (and required, one per fold) only when the
    stage-1 majority is suitable.
    """
    votes1 = tuple(votes1)
    if not votes1:
        raise DataError(f"image {image_id!r} has no stage-1 votes")
    gate = majority_vote(votes1, tie_break=stage1_tie)
    votes2 = tuple(votes2) if votes2 is not None else None
    if gate is Stage1Label.RUBBISH:
        final = FinalLabel.RUBBISH
    else:
        if votes2 is None or len(votes2) != len(votes1):
            have = 0 if votes2 is None else len(votes2)
            raise CoverageError(
                f"image {image_id!r} voted suitable but has {have} of "
                f"{len(votes1)} stage-2 votes"
            )
        final = FinalLabel(majority_vote(votes2, tie_break=stage2_tie).value)
    composed = (
        compose_scores(p_rubbish, p_healthy)
        if p_rubbish is not None and p_healthy is not None
        else None
    )
    return CascadeOutput(
        image_id=image_id,
        final=final,
        votes1=votes1,
        votes2=votes2,
        composed_scores=composed,
        p_rubbish=p_rubbish,
    )


def fold_stage_scores(
    table: PredictionTable,
    fold: int,
    stage: Stage,
    image_ids: Sequence[str],
    models: Sequence[str] | None = None,
    *,
    required: bool = True,
) -> tuple[np.ndarray, np.ndarray | None, int]:
    """Model-averaged probabilities aligned to sorted(image_ids).

    Returns (mean_p1, mean_p2 or None for stage 1, n_models). Every
    requested image must carry one row per model of the fold/stage; a gap
    raises CoverageError (or yields NaN rows when ``required`` is False,
    for callers that tolerate partial coverage).
    """
    wanted = np.array(sorted(set(image_ids)), dtype=object)
    if len(wanted) == 0:
        raise DataError("no image ids requested")
    keep = table.mask(fold=fold, stage=stage)
    if models is not None:
        keep &= np.isin(table.model_ids, np.array(list(models), dtype=object))
    imgs = table.image_ids[keep]
    if len(imgs) == 0:
        raise CoverageError(f"no predictions for fold {fold} / {stage.value}")

    pos = np.searchsorted(wanted, imgs)
    pos_clipped = np.minimum(pos, len(wanted) - 1)
    relevant = wanted[pos_clipped] == imgs
    pos = pos_clipped[relevant]

    mods = table.model_ids[keep][relevant]
    unique_mods, mod_inv = np.unique(mods, return_inverse=True)
    if models is not None:
        missing_models = set(models) - set(str(m) for m in unique_mods)
        if missing_models and required:
            raise CoverageError(
                f"fold {fold} / {stage.value}: no rows at all for model(s) "
                f"{sorted(missing_models)}"
            )
    n_models = len(unique_mods)

    p1 = np.full((len(wanted), n_models), np.nan)
    p1[pos, mod_inv] = table.p1[keep][relevant]
    p2 = None
    if stage is Stage.STAGE2:
        p2 = np.full((len(wanted), n_models), np.nan)
        p2[pos, mod_inv] = table.p2[keep][relevant]

    gaps = np.isnan(p1)
    if np.any(gaps):
        if required:
            i, j = np.argwhere(gaps)[0]
            raise CoverageError(
                f"image {wanted[i]!r} is missing a prediction from model "
                f"{unique_mods[j]!r} for fold {fold} / {stage.value}"
            )
        # Rows with any gap average to NaN; complete rows stay usable.
        mean1 = p1.mean(axis=1)
        if p2 is not None:
            return mean1, p2.mean(axis=1), n_models
        return mean1, None, n_models

    mean1 = p1.mean(axis=1)
    mean2 = p2.mean(axis=1) if p2 is not None else None
    return mean1, mean2, n_models


def fold_decisions(
    table: PredictionTable,
    cal: ThresholdCalibration,
    image_ids: Sequence[str],
    models: Sequence[str] | None = None,
) -> list[FoldDecision]:
    """Threshold one fold/stage's averaged probabilities into decisions."""
    mean1, _, _ = fold_stage_scores(table, cal.fold_id, cal.stage, image_ids, models)
    wanted = sorted(set(image_ids))
    out = []
    for image_id, p in zip(wanted, mean1):
        positive = p >= cal.threshold
        if cal.stage is Stage.STAGE1:
            decision = Stage1Label.RUBBISH if positive else Stage1Label.SUITABLE
        else:
            decision = Stage2Label.HEALTHY if positive else Stage2Label.UNHEALTHY
        out.append(
            FoldDecision(
                image_id=image_id, fold_id=cal.fold_id, stage=cal.stage, decision=decision
            )
        )
    return out


def predict_external(
    table: PredictionTable,
    calibrations: Mapping[int, Mapping[Stage, ThresholdCalibration]],
    *,
    stage1_tie: Stage1Label = STAGE1_TIE_DEFAULT,
    stage2_tie: Stage2Label = STAGE2_TIE_DEFAULT,
) -> list[CascadeOutput]:
    """Cross-fold majority-voted labels for an unlabeled image panel.

    Every image needs complete stage-1 coverage in every calibrated fold;
    stage-2 coverage is required only for images whose stage-1 vote is
    suitable. Composed scores use the cross-fold mean probabilities.
    """
    folds = sorted(calibrations)
    if not folds:
        raise DataError("no calibrations given")
    for fold in folds:
        for stage in (Stage.STAGE1, Stage.STAGE2):
            if stage not in calibrations[fold]:
                raise CoverageError(f"missing calibration for fold {fold} / {stage.value}")

    images = table.unique_image_ids()
    n = len(images)
    p_rub = np.empty((n, len(folds)))
    dec1 = np.empty((n, len(folds)), dtype=bool)  # True = rubbish
    p_heal = np.full((n, len(folds)), np.nan)
    dec2 = np.zeros((n, len(folds)), dtype=bool)  # True = healthy

    stage1_gaps: dict[str, list[int]] = {}
    for j, fold in enumerate(folds):
        try:
            mean1, _, _ = fold_stage_scores(
                table, fold, Stage.STAGE1, images, required=False
            )
        except CoverageError:  # no stage-1 rows for this fold at all
            mean1 = np.full(n, np.nan)
        for i in np.flatnonzero(np.isnan(mean1)):
            stage1_gaps.setdefault(images[i], []).append(fold)
        p_rub[:, j] = mean1
        with np.errstate(invalid="ignore"):
            dec1[:, j] = mean1 >= calibrations[fold][Stage.STAGE1].threshold
        try:
            mean_h, _, _ = fold_stage_scores(
                table, fold, Stage.STAGE2, images, required=False
            )
        except CoverageError:
            mean_h = np.full(n, np.nan)
        p_heal[:, j] = mean_h
        with np.errstate(invalid="ignore"):
            # NaN compares False; such rows are only read when coverage is complete.
            dec2[:, j] = mean_h >= calibrations[fold][Stage.STAGE2].threshold

    if stage1_gaps:
        listed = [
            f"{image_id} (fold {', '.join(str(f) for f in sorted(fold_list))})"
            for image_id, fold_list in sorted(stage1_gaps.items())
        ]
        shown = listed[:20]
        if len(listed) > len(shown):
            shown.append(f"... and {len(listed) - len(shown)} more")
        raise CoverageError(
            "incomplete stage-1 fold coverage for: " + "; ".join(shown)
        )

    outputs = []
    for i, image_id in enumerate(images):
        votes1 = tuple(
            Stage1Label.RUBBISH if rub else Stage1Label.SUITABLE for rub in dec1[i]
        )
        has_stage2 = not np.any(np.isnan(p_heal[i]))
        votes2 = (
            tuple(
                Stage2Label.HEALTHY if heal else Stage2Label.UNHEALTHY
                for heal in dec2[i]
            )
            if has_stage2
            else None
        )
        outputs.append(
            cascade_predict(
                image_id,
                votes1,
                votes2,
                p_rubbish=float(p_rub[i].mean()),
                p_healthy=float(p_heal[i].mean()) if has_stage2 else None,
                stage1_tie=stage1_tie,
                stage2_tie=stage2_tie,
            )
        )
    return outputs


def calibrations_by_fold(
    calibrations: Iterable[ThresholdCalibration],
) -> dict[int, dict[Stage, ThresholdCalibration]]:
    """Index a flat calibration list; duplicates are rejected."""
    out: dict[int, dict[Stage, ThresholdCalibration]] = {}
    for cal in calibrations:
        per_fold = out.setdefault(cal.fold_id, {})
        if cal.stage in per_fold:
            raise DataError(
                f"duplicate calibration for fold {cal.fold_id} / {cal.stage.value}"
            )
        per_fold[cal.stage] = cal
    return out
