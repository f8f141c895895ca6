"""Readers and writers for the on-disk interchange formats.

Everything is UTF-8 CSV/JSON with '.' as the decimal separator. Floats are
written with ``repr``, i.e. the shortest string that round-trips the exact
binary64 value (never more than 17 significant digits), so ingest/serialize
cycles are byte-stable.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path
from typing import IO, Iterable, Literal

import numpy as np

from .calibration import Objective, ThresholdCalibration
from .errors import DataError, FormatError
from .labels import FinalLabel, RawLabel
from .splitting import FoldAssignment, Subset
from .tables import LabelTable, PredictionTable, Stage, logits_to_probabilities

PREDICTION_HEADER = ["image_id", "model_id", "fold", "stage", "p1", "p2"]
LABEL_HEADER = ["image_id", "label"]
SPLIT_HEADER = ["image_id", "fold", "subset"]
FINAL_HEADER = [
    "image_id",
    "final_label",
    "p_rubbish",
    "p_healthy_composed",
    "p_unhealthy_composed",
    "votes_stage1",
    "votes_stage2",
]

_STAGE_TAGS = {"stage1": Stage.STAGE1, "stage2": Stage.STAGE2}
_RAW_TAGS = {label.value: label for label in RawLabel}

ValueKind = Literal["probability", "logit"]


def _fmt(x: float) -> str:
    return repr(float(x))


def _open_text(source: str | Path | IO[str], mode: str = "r"):
    if isinstance(source, (str, Path)):
        return open(source, mode, encoding="utf-8", newline="")
    return source


def _reader_rows(handle: IO[str]):
    return csv.reader(handle)


# -- prediction tables -------------------------------------------------------


def read_predictions(
    source: str | Path | IO[str], *, values: ValueKind = "probability"
) -> PredictionTable:
    """Parse a prediction CSV into a validated table.

    ``values="logit"`` reads raw logit columns and converts them through a
    sigmoid at ingest; the default expects probabilities already in [0, 1].
    Errors carry the 1-based line number of the offending row.
    """
    path = str(source) if isinstance(source, (str, Path)) else None
    handle = _open_text(source)
    try:
        rows = _reader_rows(handle)
        try:
            header = next(rows)
        except StopIteration:
            raise FormatError("empty file", path=path, line=1) from None
        header = [h.strip() for h in header]
        if header != PREDICTION_HEADER and header != PREDICTION_HEADER[:5]:
            raise FormatError(
                f"bad header {header!r}, expected {','.join(PREDICTION_HEADER)}",
                path=path,
                line=1,
            )

        image_ids: list[str] = []
        model_ids: list[str] = []
        folds: list[int] = []
        stages: list[int] = []
        p1: list[float] = []
        p2: list[float] = []
        lines: list[int] = []
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) == 5:
                row = row + [""]
            if len(row) != 6:
                raise FormatError(
                    f"expected 5 or 6 fields, got {len(row)}", path=path, line=lineno
                )
            image_id, model_id, fold_s, stage_s, p1_s, p2_s = (f.strip() for f in row)
            if not image_id or not model_id:
                raise FormatError("empty image or model id", path=path, line=lineno)
            if stage_s not in _STAGE_TAGS:
                raise FormatError(f"unknown stage tag {stage_s!r}", path=path, line=lineno)
            stage = _STAGE_TAGS[stage_s]
            try:
                fold = int(fold_s)
            except ValueError:
                raise FormatError(f"bad fold {fold_s!r}", path=path, line=lineno) from None
            if fold < 1:
                raise FormatError(f"fold must be >= 1, got {fold}", path=path, line=lineno)
            try:
                v1 = float(p1_s)
            except ValueError:
                raise FormatError(f"bad number {p1_s!r}", path=path, line=lineno) from None
            if stage is Stage.STAGE1:
                if p2_s:
                    raise FormatError(
                        "stage1 row must leave p2 empty", path=path, line=lineno
                    )
                v2 = np.nan
            else:
                if not p2_s:
                    raise FormatError("stage2 row needs p2", path=path, line=lineno)
                try:
                    v2 = float(p2_s)
                except ValueError:
                    raise FormatError(f"bad number {p2_s!r}", path=path, line=lineno) from None
            image_ids.append(image_id)
            model_ids.append(model_id)
            folds.append(fold)
            stages.append(1 if stage is Stage.STAGE1 else 2)
            p1.append(v1)
            p2.append(v2)
            lines.append(lineno)
    finally:
        if path is not None:
            handle.close()

    p1_arr = np.asarray(p1, dtype=np.float64)
    p2_arr = np.asarray(p2, dtype=np.float64)
    line_arr = np.asarray(lines, dtype=np.int64)
    s1 = np.asarray(stages, dtype=np.int8) == 1
    if values == "logit":
        finite = np.isfinite(p1_arr) & (s1 | np.isfinite(p2_arr))
        if not np.all(finite):
            bad = int(line_arr[~finite][0])
            raise FormatError("non-finite logit", path=path, line=bad)
        p1_arr = logits_to_probabilities(p1_arr)
        p2_arr[~s1] = logits_to_probabilities(p2_arr[~s1])
    else:
        bad1 = ~np.isfinite(p1_arr) | (p1_arr < 0.0) | (p1_arr > 1.0)
        bad2 = ~s1 & (~np.isfinite(p2_arr) | (p2_arr < 0.0) | (p2_arr > 1.0))
        bad = bad1 | bad2
        if np.any(bad):
            raise FormatError(
                "probability outside [0, 1]", path=path, line=int(line_arr[bad][0])
            )

    table = PredictionTable(
        np.array(image_ids, dtype=object),
        np.array(model_ids, dtype=object),
        np.array(folds, dtype=np.int64),
        np.array(stages, dtype=np.int8),
        p1_arr,
        p2_arr,
    )
    return table


def write_predictions(table: PredictionTable, target: str | Path | IO[str]) -> None:
    """Write a prediction table in row order."""
    path = str(target) if isinstance(target, (str, Path)) else None
    handle = _open_text(target, "w")
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PREDICTION_HEADER)
        s1_code = 1
        for i in range(len(table)):
            stage1 = int(table.stage_codes[i]) == s1_code
            writer.writerow(
                [
                    table.image_ids[i],
                    table.model_ids[i],
                    int(table.folds[i]),
                    "stage1" if stage1 else "stage2",
                    _fmt(table.p1[i]),
                    "" if stage1 else _fmt(table.p2[i]),
                ]
            )
    finally:
        if path is not None:
            handle.close()


# -- label tables -------------------------------------------------------------


def read_labels(source: str | Path | IO[str]) -> LabelTable:
    """Parse a ground-truth label CSV; spellings are strict lowercase."""
    path = str(source) if isinstance(source, (str, Path)) else None
    handle = _open_text(source)
    entries: dict[str, RawLabel] = {}
    try:
        rows = _reader_rows(handle)
        try:
            header = next(rows)
        except StopIteration:
            raise FormatError("empty file", path=path, line=1) from None
        if [h.strip() for h in header] != LABEL_HEADER:
            raise FormatError(
                f"bad header, expected {','.join(LABEL_HEADER)}", path=path, line=1
            )
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(
                    f"expected 2 fields, got {len(row)}", path=path, line=lineno
                )
            image_id, tag = row[0].strip(), row[1].strip()
            if not image_id:
                raise FormatError("empty image id", path=path, line=lineno)
            if tag not in _RAW_TAGS:
                raise FormatError(f"unknown label {tag!r}", path=path, line=lineno)
            if image_id in entries:
                raise FormatError(f"duplicate image id {image_id!r}", path=path, line=lineno)
            entries[image_id] = _RAW_TAGS[tag]
    finally:
        if path is not None:
            handle.close()
    if not entries:
        raise FormatError("label table has no rows", path=path, line=2)
    return LabelTable(entries)


def write_labels(labels: LabelTable, target: str | Path | IO[str]) -> None:
    path = str(target) if isinstance(target, (str, Path)) else None
    handle = _open_text(target, "w")
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(LABEL_HEADER)
        for image_id in labels.image_ids():
            writer.writerow([image_id, labels[image_id].value])
    finally:
        if path is not None:
            handle.close()


# -- fold assignments ---------------------------------------------------------


def write_splits(folds: Iterable[FoldAssignment], target: str | Path | IO[str]) -> None:
    """Write one row per (image, fold), ordered by fold then image id."""
    path = str(target) if isinstance(target, (str, Path)) else None
    handle = _open_text(target, "w")
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SPLIT_HEADER)
        for assignment in sorted(folds, key=lambda a: a.fold_id):
            for subset in (Subset.TRAIN, Subset.VAL, Subset.TEST):
                for image_id in sorted(assignment.subset(subset)):
                    writer.writerow([image_id, assignment.fold_id, subset.value])
    finally:
        if path is not None:
            handle.close()


def read_splits(source: str | Path | IO[str]) -> list[FoldAssignment]:
    path = str(source) if isinstance(source, (str, Path)) else None
    handle = _open_text(source)
    per_fold: dict[int, dict[Subset, set[str]]] = {}
    try:
        rows = _reader_rows(handle)
        try:
            header = next(rows)
        except StopIteration:
            raise FormatError("empty file", path=path, line=1) from None
        if [h.strip() for h in header] != SPLIT_HEADER:
            raise FormatError(
                f"bad header, expected {','.join(SPLIT_HEADER)}", path=path, line=1
            )
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(
                    f"expected 3 fields, got {len(row)}", path=path, line=lineno
                )
            image_id, fold_s, subset_s = (f.strip() for f in row)
            try:
                fold = int(fold_s)
            except ValueError:
                raise FormatError(f"bad fold {fold_s!r}", path=path, line=lineno) from None
            try:
                subset = Subset(subset_s)
            except ValueError:
                raise FormatError(f"unknown subset {subset_s!r}", path=path, line=lineno) from None
            buckets = per_fold.setdefault(
                fold, {Subset.TRAIN: set(), Subset.VAL: set(), Subset.TEST: set()}
            )
            for other in buckets.values():
                if image_id in other:
                    raise FormatError(
                        f"image {image_id!r} assigned twice in fold {fold}",
                        path=path,
                        line=lineno,
                    )
            buckets[subset].add(image_id)
    finally:
        if path is not None:
            handle.close()
    if not per_fold:
        raise FormatError("split table has no rows", path=path, line=2)
    return [
        FoldAssignment(
            fold_id=fold,
            train=frozenset(buckets[Subset.TRAIN]),
            validation=frozenset(buckets[Subset.VAL]),
            test=frozenset(buckets[Subset.TEST]),
            seed=None,
        )
        for fold, buckets in sorted(per_fold.items())
    ]


# -- threshold calibrations ---------------------------------------------------


def write_thresholds(
    calibrations: Iterable[ThresholdCalibration], target: str | Path | IO[str]
) -> None:
    payload = [
        {
            "fold": cal.fold_id,
            "stage": cal.stage.value,
            "objective": cal.objective.value,
            "threshold": cal.threshold,
            "achieved_score": cal.achieved_score,
        }
        for cal in sorted(calibrations, key=lambda c: (c.fold_id, c.stage.value))
    ]
    text = json.dumps(payload, indent=2) + "\n"
    path = str(target) if isinstance(target, (str, Path)) else None
    handle = _open_text(target, "w")
    try:
        handle.write(text)
    finally:
        if path is not None:
            handle.close()


def read_thresholds(source: str | Path | IO[str]) -> list[ThresholdCalibration]:
    path = str(source) if isinstance(source, (str, Path)) else None
    handle = _open_text(source)
    try:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad JSON: {exc}", path=path) from None
    finally:
        if path is not None:
            handle.close()
    if not isinstance(payload, list):
        raise FormatError("thresholds file must hold a JSON list", path=path)
    out = []
    for i, item in enumerate(payload):
        try:
            out.append(
                ThresholdCalibration(
                    fold_id=int(item["fold"]),
                    stage=Stage(item["stage"]),
                    threshold=float(item["threshold"]),
                    achieved_score=float(item["achieved_score"]),
                    objective=Objective(item["objective"]),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"bad calibration entry #{i}: {exc}", path=path) from None
    return out


# -- final cascade output -----------------------------------------------------


def write_final_predictions(outputs, target: str | Path | IO[str]) -> None:
    """Write cascade outputs sorted by image id.

    Stage-2 columns are left empty for images the stage-1 vote rejected
    without stage-2 coverage.
    """
    path = str(target) if isinstance(target, (str, Path)) else None
    handle = _open_text(target, "w")
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FINAL_HEADER)
        for out in sorted(outputs, key=lambda o: o.image_id):
            votes1 = "".join("R" if v.value == "rubbish" else "S" for v in out.votes1)
            votes2 = (
                "".join("H" if v.value == "healthy" else "U" for v in out.votes2)
                if out.votes2 is not None
                else ""
            )
            if out.composed_scores is not None:
                s_r, s_h, s_u = (_fmt(v) for v in out.composed_scores)
            else:
                s_r = _fmt(out.p_rubbish) if out.p_rubbish is not None else ""
                s_h = s_u = ""
            writer.writerow(
                [out.image_id, out.final.value, s_r, s_h, s_u, votes1, votes2]
            )
    finally:
        if path is not None:
            handle.close()


def parse_csv_text(text: str) -> list[list[str]]:
    """Small helper for tests: parse CSV text into rows."""
    return list(csv.reader(_io.StringIO(text)))
