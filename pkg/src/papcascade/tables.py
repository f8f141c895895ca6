"""Probability tables and ground-truth label tables.

``PredictionTable`` holds one sigmoid output row per (image, model, fold,
stage). Storage is columnar (numpy arrays) so that hundred-thousand-image
panels stay cheap to filter and average; ``PredictionRecord`` is the
per-row view used at the API boundary. All containers are immutable after
construction and safe for concurrent reads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DataError
from .labels import RawLabel


class Stage(enum.Enum):
    """Which cascade stage a probability row belongs to."""

    STAGE1 = "stage1"
    STAGE2 = "stage2"


def logits_to_probabilities(logits: Sequence[float] | np.ndarray) -> np.ndarray:
    """Componentwise sigmoid, 1 / (1 + exp(-z)).

    Computed with the numerically symmetric split so that sigmoid(-z) is
    exactly 1 - sigmoid(z) never overflows for large |z|.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise DataError("logits must be finite")
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class PredictionRecord:
    """One model's probability vector for one image in one fold/stage."""

    image_id: str
    model_id: str
    fold_id: int
    stage: Stage
    p: tuple[float, ...]

    def __post_init__(self) -> None:
        expected = 1 if self.stage is Stage.STAGE1 else 2
        if len(self.p) != expected:
            raise DataError(
                f"{self.stage.value} record needs a length-{expected} probability "
                f"vector, got {len(self.p)}"
            )
        for value in self.p:
            if not np.isfinite(value) or not 0.0 <= value <= 1.0:
                raise DataError(f"probability {value!r} outside [0, 1]")
        if self.fold_id < 1:
            raise DataError(f"fold id must be >= 1, got {self.fold_id}")


@dataclass(frozen=True)
class LabelTable:
    """Immutable map from image id to its raw annotation."""

    entries: Mapping[str, RawLabel] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.entries:
            raise DataError("label table is empty")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, image_id: str) -> RawLabel:
        return self.entries[image_id]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.entries

    def image_ids(self) -> list[str]:
        return sorted(self.entries)

    def counts(self) -> dict[RawLabel, int]:
        tally = {label: 0 for label in RawLabel}
        for label in self.entries.values():
            tally[label] += 1
        return tally


_STAGE_CODES = {Stage.STAGE1: 1, Stage.STAGE2: 2}
_CODE_STAGES = {code: stage for stage, code in _STAGE_CODES.items()}


class PredictionTable:
    """Validated, columnar collection of prediction rows.

    Rows keep their construction order (serialization round-trips preserve
    it); every accessor returning ids sorts them, so downstream math is
    independent of row order.
    """

    def __init__(
        self,
        image_ids: np.ndarray,
        model_ids: np.ndarray,
        folds: np.ndarray,
        stage_codes: np.ndarray,
        p1: np.ndarray,
        p2: np.ndarray,
        *,
        _validated: bool = False,
    ):
        self.image_ids = np.asarray(image_ids, dtype=object)
        self.model_ids = np.asarray(model_ids, dtype=object)
        self.folds = np.asarray(folds, dtype=np.int64)
        self.stage_codes = np.asarray(stage_codes, dtype=np.int8)
        self.p1 = np.asarray(p1, dtype=np.float64)
        self.p2 = np.asarray(p2, dtype=np.float64)
        if not _validated:
            self._validate()

    # -- construction ------------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[PredictionRecord]) -> "PredictionTable":
        image_ids: list[str] = []
        model_ids: list[str] = []
        folds: list[int] = []
        stages: list[int] = []
        p1: list[float] = []
        p2: list[float] = []
        for rec in records:
            image_ids.append(rec.image_id)
            model_ids.append(rec.model_id)
            folds.append(rec.fold_id)
            stages.append(_STAGE_CODES[rec.stage])
            p1.append(rec.p[0])
            p2.append(rec.p[1] if rec.stage is Stage.STAGE2 else np.nan)
        return cls(
            np.array(image_ids, dtype=object),
            np.array(model_ids, dtype=object),
            np.array(folds, dtype=np.int64),
            np.array(stages, dtype=np.int8),
            np.array(p1, dtype=np.float64),
            np.array(p2, dtype=np.float64),
        )

    def _validate(self) -> None:
        n = len(self.image_ids)
        for name, arr in (
            ("model_ids", self.model_ids),
            ("folds", self.folds),
            ("stage_codes", self.stage_codes),
            ("p1", self.p1),
            ("p2", self.p2),
        ):
            if len(arr) != n:
                raise DataError(f"column {name} has length {len(arr)}, expected {n}")
        if n == 0:
            raise DataError("prediction table is empty")
        if np.any(self.folds < 1):
            raise DataError("fold ids must be >= 1")
        unknown = ~np.isin(self.stage_codes, list(_CODE_STAGES))
        if np.any(unknown):
            raise DataError("unknown stage code in prediction table")

        s1 = self.stage_codes == _STAGE_CODES[Stage.STAGE1]
        bad1 = ~np.isfinite(self.p1) | (self.p1 < 0.0) | (self.p1 > 1.0)
        if np.any(bad1):
            raise DataError("p1 outside [0, 1] or non-finite")
        p2_s2 = self.p2[~s1]
        if np.any(~np.isfinite(p2_s2) | (p2_s2 < 0.0) | (p2_s2 > 1.0)):
            raise DataError("stage2 p2 outside [0, 1] or non-finite")
        if np.any(~np.isnan(self.p2[s1])):
            raise DataError("stage1 rows must not carry a second probability")

        dup = self._first_duplicate_index()
        if dup is not None:
            raise DataError(
                "duplicate prediction key "
                f"({self.image_ids[dup]}, {self.model_ids[dup]}, "
                f"fold {self.folds[dup]}, {_CODE_STAGES[int(self.stage_codes[dup])].value})"
            )

    def _first_duplicate_index(self) -> int | None:
        """Index (in row order) of the first row repeating an earlier key."""
        img_codes = _codes(self.image_ids)
        mod_codes = _codes(self.model_ids)
        order = np.lexsort((img_codes, mod_codes, self.folds, self.stage_codes))
        same = (
            (np.diff(img_codes[order]) == 0)
            & (np.diff(mod_codes[order]) == 0)
            & (np.diff(self.folds[order]) == 0)
            & (np.diff(self.stage_codes[order]) == 0)
        )
        if not np.any(same):
            return None
        hits = np.flatnonzero(same)
        # Of each colliding pair, the later row (in construction order) is
        # the duplicate; report the earliest one.
        return int(np.min(np.maximum(order[hits], order[hits + 1])))

    # -- views -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.image_ids)

    def records(self) -> Iterator[PredictionRecord]:
        for i in range(len(self)):
            stage = _CODE_STAGES[int(self.stage_codes[i])]
            p = (float(self.p1[i]),) if stage is Stage.STAGE1 else (
                float(self.p1[i]),
                float(self.p2[i]),
            )
            yield PredictionRecord(
                image_id=str(self.image_ids[i]),
                model_id=str(self.model_ids[i]),
                fold_id=int(self.folds[i]),
                stage=stage,
                p=p,
            )

    def mask(
        self,
        *,
        fold: int | None = None,
        stage: Stage | None = None,
        models: Sequence[str] | None = None,
        image_ids: Sequence[str] | None = None,
    ) -> np.ndarray:
        keep = np.ones(len(self), dtype=bool)
        if fold is not None:
            keep &= self.folds == fold
        if stage is not None:
            keep &= self.stage_codes == _STAGE_CODES[stage]
        if models is not None:
            keep &= np.isin(self.model_ids, np.array(list(models), dtype=object))
        if image_ids is not None:
            keep &= np.isin(self.image_ids, np.array(list(image_ids), dtype=object))
        return keep

    def select(self, **kwargs) -> "PredictionTable":
        keep = self.mask(**kwargs)
        return PredictionTable(
            self.image_ids[keep],
            self.model_ids[keep],
            self.folds[keep],
            self.stage_codes[keep],
            self.p1[keep],
            self.p2[keep],
            _validated=True,
        )

    def fold_ids(self) -> list[int]:
        return sorted(int(f) for f in np.unique(self.folds))

    def model_names(self, stage: Stage | None = None) -> list[str]:
        keep = self.mask(stage=stage) if stage is not None else slice(None)
        return sorted(str(m) for m in np.unique(self.model_ids[keep]))

    def unique_image_ids(self) -> list[str]:
        return sorted(str(i) for i in np.unique(self.image_ids))


def _codes(values: np.ndarray) -> np.ndarray:
    """Factorize an object array into int codes (sorted-unique order)."""
    _, inverse = np.unique(values, return_inverse=True)
    return inverse
