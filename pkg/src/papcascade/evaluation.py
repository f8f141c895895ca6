"""Per-fold evaluation, per-method aggregation, and report emission.

Evaluation reproduces the benchmark-table protocol: for each method (one
model alone, or the model-averaged ensemble) and each fold, thresholds are
taken from the fold's validation split and applied to its test split; the
resulting single-fold labels are scored and the per-fold values aggregated
as mean and sample standard deviation. Cross-fold voting is a separate
prediction mode and never enters these tables.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np

from .calibration import Objective, ThresholdCalibration, sweep_threshold
from .cascade import fold_stage_scores
from .errors import CoverageError, DataError
from .labels import (
    FINAL_CLASSES,
    FinalLabel,
    RawLabel,
    final_label_from_raw,
    map_stage2_target,
)
from .metrics import Aggregate, FoldMetrics, aggregate_values, fold_metrics
from .splitting import FoldAssignment
from .tables import LabelTable, PredictionTable, Stage

ENSEMBLE_METHOD = "ensemble"

DEFAULT_OBJECTIVES: dict[Stage, Objective] = {
    Stage.STAGE1: Objective.F1_POSITIVE,  # rubbish treated as the positive class
    Stage.STAGE2: Objective.MACRO_F1,
}


def _stage1_truth(labels: LabelTable, image_ids: Sequence[str]) -> np.ndarray:
    return np.array([labels[i] is RawLabel.RUBBISH for i in image_ids], dtype=bool)


def _stage2_ids_and_truth(
    labels: LabelTable, image_ids: Sequence[str]
) -> tuple[list[str], np.ndarray]:
    ids = [i for i in image_ids if labels[i] is not RawLabel.RUBBISH]
    truth = np.array([map_stage2_target(labels[i]).healthy for i in ids], dtype=bool)
    return ids, truth


def calibrate_fold_stage(
    table: PredictionTable,
    labels: LabelTable,
    assignment: FoldAssignment,
    stage: Stage,
    objective: Objective,
    models: Sequence[str] | None = None,
) -> ThresholdCalibration:
    """Sweep the fold's validation split for one stage."""
    val_ids = sorted(assignment.validation)
    if not val_ids:
        raise CoverageError(f"fold {assignment.fold_id} has an empty validation set")
    if stage is Stage.STAGE1:
        ids = val_ids
        truth = _stage1_truth(labels, ids)
    else:
        ids, truth = _stage2_ids_and_truth(labels, val_ids)
        if not ids:
            raise CoverageError(
                f"fold {assignment.fold_id} has no non-rubbish validation images"
            )
    try:
        mean1, _, _ = fold_stage_scores(table, assignment.fold_id, stage, ids, models)
    except CoverageError as exc:
        raise CoverageError(
            f"fold {assignment.fold_id} / {stage.value}: {exc}"
        ) from None
    return sweep_threshold(
        mean1, truth, objective, fold_id=assignment.fold_id, stage=stage
    )


def calibrate_all(
    table: PredictionTable,
    labels: LabelTable,
    assignments: Sequence[FoldAssignment],
    objectives: Mapping[Stage, Objective] = DEFAULT_OBJECTIVES,
    models: Sequence[str] | None = None,
) -> list[ThresholdCalibration]:
    """One calibration per (fold, stage), ensemble-averaged over ``models``.

    Coverage gaps are collected across all folds and stages and reported
    in one error rather than aborting at the first hole.
    """
    out = []
    gaps: list[str] = []
    for assignment in sorted(assignments, key=lambda a: a.fold_id):
        assignment.check_against_labels(labels)
        for stage in (Stage.STAGE1, Stage.STAGE2):
            try:
                out.append(
                    calibrate_fold_stage(
                        table, labels, assignment, stage, objectives[stage], models
                    )
                )
            except CoverageError as exc:
                gaps.append(str(exc))
    if gaps:
        raise CoverageError(
            "validation coverage gaps:\n  " + "\n  ".join(gaps)
        )
    return out


def evaluate_fold(
    table: PredictionTable,
    labels: LabelTable,
    assignment: FoldAssignment,
    cal1: ThresholdCalibration,
    cal2: ThresholdCalibration,
    models: Sequence[str] | None = None,
) -> FoldMetrics:
    """Score one method's single-fold decisions on the fold's test split.

    Stage-2 probabilities are required for every test image: the composed
    3-class scores behind AUROC need them even for images the stage-1
    threshold rejects.
    """
    test_ids = sorted(assignment.test)
    if not test_ids:
        raise CoverageError(f"fold {assignment.fold_id} has an empty test set")
    truth = [final_label_from_raw(labels[i]) for i in test_ids]
    fold = assignment.fold_id
    p_rub, _, _ = fold_stage_scores(table, fold, Stage.STAGE1, test_ids, models)
    p_heal, _, _ = fold_stage_scores(table, fold, Stage.STAGE2, test_ids, models)

    is_rubbish = p_rub >= cal1.threshold
    is_healthy = p_heal >= cal2.threshold
    pred = [
        FinalLabel.RUBBISH
        if rub
        else (FinalLabel.HEALTHY if heal else FinalLabel.UNHEALTHY)
        for rub, heal in zip(is_rubbish, is_healthy)
    ]

    rest = 1.0 - p_rub
    composed = np.column_stack((p_rub, rest * p_heal, rest * (1.0 - p_heal)))
    return fold_metrics(truth, pred, composed)


@dataclass(frozen=True)
class MethodReport:
    method: str
    per_fold: Mapping[int, FoldMetrics]
    aggregate: Mapping[str, Aggregate]
    per_class_aggregate: Mapping[FinalLabel, Aggregate]


@dataclass(frozen=True)
class PanelReport:
    """Everything the report files carry: per-fold and aggregated metrics."""

    folds: tuple[int, ...]
    methods: Mapping[str, MethodReport]


def _aggregate_method(method: str, per_fold: dict[int, FoldMetrics]) -> MethodReport:
    folds = sorted(per_fold)
    aggregate = {
        name: aggregate_values([getattr(per_fold[f], name) for f in folds])
        for name in FoldMetrics.SCALARS
    }
    per_class = {
        label: aggregate_values([per_fold[f].per_class_f1[label] for f in folds])
        for label in FINAL_CLASSES
    }
    return MethodReport(
        method=method,
        per_fold=per_fold,
        aggregate=aggregate,
        per_class_aggregate=per_class,
    )


def evaluate_panel(
    table: PredictionTable,
    labels: LabelTable,
    assignments: Sequence[FoldAssignment],
    ensemble_calibrations: Sequence[ThresholdCalibration],
    *,
    methods: Sequence[str] | None = None,
    threads: int = 1,
) -> PanelReport:
    """Evaluate every individual model plus the ensemble across all folds.

    ``ensemble_calibrations`` supply the ensemble method's thresholds (and
    fix the sweep objectives); individual models are calibrated internally
    with the same objectives, mirroring the two-step protocol per model.
    """
    by_fold: dict[int, dict[Stage, ThresholdCalibration]] = {}
    objectives = dict(DEFAULT_OBJECTIVES)
    for cal in ensemble_calibrations:
        by_fold.setdefault(cal.fold_id, {})[cal.stage] = cal
        objectives[cal.stage] = cal.objective

    assignments = sorted(assignments, key=lambda a: a.fold_id)
    for assignment in assignments:
        assignment.check_against_labels(labels)
        per_fold = by_fold.get(assignment.fold_id, {})
        for stage in (Stage.STAGE1, Stage.STAGE2):
            if stage not in per_fold:
                raise CoverageError(
                    f"missing calibration for fold {assignment.fold_id} / {stage.value}"
                )

    model_names = table.model_names()
    if methods is None:
        method_list = list(model_names) + [ENSEMBLE_METHOD]
    else:
        method_list = list(methods)
        for name in method_list:
            if name != ENSEMBLE_METHOD and name not in model_names:
                raise DataError(f"unknown method {name!r}")

    def run_one(method: str, assignment: FoldAssignment) -> FoldMetrics:
        models = None if method == ENSEMBLE_METHOD else [method]
        if method == ENSEMBLE_METHOD:
            cal1 = by_fold[assignment.fold_id][Stage.STAGE1]
            cal2 = by_fold[assignment.fold_id][Stage.STAGE2]
        else:
            cal1 = calibrate_fold_stage(
                table, labels, assignment, Stage.STAGE1, objectives[Stage.STAGE1], models
            )
            cal2 = calibrate_fold_stage(
                table, labels, assignment, Stage.STAGE2, objectives[Stage.STAGE2], models
            )
        return evaluate_fold(table, labels, assignment, cal1, cal2, models)

    tasks = [(method, assignment) for method in method_list for assignment in assignments]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: run_one(*t), tasks))
    else:
        results = [run_one(*t) for t in tasks]

    per_method: dict[str, dict[int, FoldMetrics]] = {m: {} for m in method_list}
    for (method, assignment), fm in zip(tasks, results):
        per_method[method][assignment.fold_id] = fm

    return PanelReport(
        folds=tuple(a.fold_id for a in assignments),
        methods={m: _aggregate_method(m, fm) for m, fm in per_method.items()},
    )


# -- report files -------------------------------------------------------------


def report_to_dict(report: PanelReport) -> dict:
    payload: dict = {
        "folds": list(report.folds),
        "classes": [c.value for c in FINAL_CLASSES],
        "methods": {},
    }
    for name, method in report.methods.items():
        per_fold = {}
        for fold, fm in sorted(method.per_fold.items()):
            per_fold[str(fold)] = {
                **fm.scalar_values(),
                "per_class_f1": {c.value: fm.per_class_f1[c] for c in FINAL_CLASSES},
                "confusion": fm.confusion.counts.tolist(),
            }
        payload["methods"][name] = {
            "per_fold": per_fold,
            "aggregate": {
                **{
                    key: {"mean": agg.mean, "std": agg.std}
                    for key, agg in method.aggregate.items()
                },
                "per_class_f1": {
                    c.value: {
                        "mean": method.per_class_aggregate[c].mean,
                        "std": method.per_class_aggregate[c].std,
                    }
                    for c in FINAL_CLASSES
                },
            },
        }
    return payload


def write_report_json(report: PanelReport, target: str | Path | IO[str]) -> None:
    text = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


REPORT_CSV_HEADER = (
    "method,fold,macro_f1,weighted_f1,precision,recall,auroc,accuracy,"
    "f1_rubbish,f1_healthy,f1_unhealthy"
)


def write_report_csv(report: PanelReport, target: str | Path | IO[str]) -> None:
    """Benchmark-table shape: per-fold rows plus one `mean ± std` row."""
    lines = [REPORT_CSV_HEADER]
    for name, method in report.methods.items():
        for fold, fm in sorted(method.per_fold.items()):
            cells = [name, str(fold)]
            cells += [f"{fm.scalar_values()[k]:.2f}" for k in FoldMetrics.SCALARS]
            cells += [f"{fm.per_class_f1[c]:.2f}" for c in FINAL_CLASSES]
            lines.append(",".join(cells))
        cells = [name, "aggregate"]
        cells += [method.aggregate[k].format() for k in FoldMetrics.SCALARS]
        cells += [method.per_class_aggregate[c].format() for c in FINAL_CLASSES]
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)
