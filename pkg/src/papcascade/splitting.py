"""Stratified train/validation/test fold construction and class weighting.

Each fold is an independent stratified re-draw (derived seed = seed +
fold_id) rather than a rotating partition: every fold splits the full
image universe into train/validation/test at the requested ratios,
class by class, with largest-remainder quota rounding. Images labeled
``both`` are confined to training subsets; they never appear in
validation or test.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .labels import RawLabel
from .tables import LabelTable


class Subset(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


SUBSETS: tuple[Subset, ...] = (Subset.TRAIN, Subset.VAL, Subset.TEST)


@dataclass(frozen=True)
class FoldAssignment:
    """One fold's partition of the image universe."""

    fold_id: int
    train: frozenset[str]
    validation: frozenset[str]
    test: frozenset[str]
    seed: int | None = None

    def subset(self, which: Subset) -> frozenset[str]:
        return {
            Subset.TRAIN: self.train,
            Subset.VAL: self.validation,
            Subset.TEST: self.test,
        }[which]

    def all_ids(self) -> frozenset[str]:
        return self.train | self.validation | self.test

    def check_against_labels(self, labels: LabelTable) -> None:
        """Verify partition and both-only-in-train against a label table."""
        if self.train & self.validation or self.train & self.test or self.validation & self.test:
            raise DataError(f"fold {self.fold_id}: subsets overlap")
        universe = set(labels.entries)
        assigned = set(self.all_ids())
        if assigned != universe:
            missing = universe - assigned
            extra = assigned - universe
            raise DataError(
                f"fold {self.fold_id}: assignment does not partition the label table "
                f"({len(missing)} unassigned, {len(extra)} unknown ids)"
            )
        for image_id in self.validation | self.test:
            if labels[image_id] is RawLabel.BOTH:
                raise DataError(
                    f"fold {self.fold_id}: image {image_id!r} labeled 'both' "
                    "appears outside the training subset"
                )


@dataclass(frozen=True)
class ClassWeights:
    """Inverse-frequency weights, unit mean under balanced counts."""

    weights: Mapping[object, float]


def class_weights(counts: Mapping[object, int]) -> ClassWeights:
    """weight_c = N / (C * n_c) with N the total count over C classes."""
    if not counts:
        raise DataError("no class counts given")
    for label, count in counts.items():
        if count < 1:
            raise DataError(f"class {label!r} has count {count}, needs >= 1")
    total = sum(counts.values())
    c = len(counts)
    return ClassWeights({label: total / (c * n) for label, n in counts.items()})


def _largest_remainder_quotas(n: int, ratios: Sequence[float]) -> list[int]:
    """Integer quotas summing to n, each within 1 of n * ratio."""
    exact = [n * r for r in ratios]
    base = [math.floor(q) for q in exact]
    short = n - sum(base)
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(exact[i] - base[i]), i)
    )
    for i in remainders[:short]:
        base[i] += 1
    return base


def _check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    if len(ratios) != 3:
        raise ConfigError("ratios must be (train, val, test)")
    if any(r <= 0 for r in ratios):
        raise ConfigError("ratios must all be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)!r}")
    return float(ratios[0]), float(ratios[1]), float(ratios[2])


def stratified_kfold_split(
    labels: LabelTable,
    k: int,
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    groups: Mapping[str, str] | None = None,
) -> list[FoldAssignment]:
    """Build k independent stratified splits of the labeled image set.

    Deterministic in (labels, k, ratios, seed) and independent of input
    ordering: ids are sorted per class before the seeded shuffle. With
    ``groups`` given (e.g. image -> patient), whole groups are assigned to
    a single subset by greedy quota matching; stratification then holds
    only as closely as the group structure allows.
    """
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    ratios = _check_ratios(ratios)

    by_class: dict[RawLabel, list[str]] = {label: [] for label in RawLabel}
    for image_id, label in labels.entries.items():
        by_class[label].append(image_id)
    for label, ids in by_class.items():
        if label is RawLabel.BOTH:
            continue
        if len(ids) < k:
            raise DataError(
                f"class {label.value!r} has {len(ids)} images, needs at least k={k}"
            )

    folds = []
    for fold_id in range(1, k + 1):
        rng = np.random.default_rng(seed + fold_id)
        if groups is None:
            assignment = _split_one_fold(by_class, ratios, rng)
        else:
            assignment = _split_one_fold_grouped(labels, by_class, ratios, rng, groups)
        train, val, test = assignment
        folds.append(
            FoldAssignment(
                fold_id=fold_id,
                train=frozenset(train),
                validation=frozenset(val),
                test=frozenset(test),
                seed=seed,
            )
        )
    return folds


def _split_one_fold(
    by_class: Mapping[RawLabel, list[str]],
    ratios: tuple[float, float, float],
    rng: np.random.Generator,
) -> tuple[list[str], list[str], list[str]]:
    train: list[str] = []
    val: list[str] = []
    test: list[str] = []
    for label in RawLabel:
        ids = sorted(by_class[label])
        if not ids:
            continue
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        if label is RawLabel.BOTH:
            train.extend(shuffled)
            continue
        q_train, q_val, _ = _largest_remainder_quotas(len(ids), ratios)
        train.extend(shuffled[:q_train])
        val.extend(shuffled[q_train : q_train + q_val])
        test.extend(shuffled[q_train + q_val :])
    return train, val, test


def _split_one_fold_grouped(
    labels: LabelTable,
    by_class: Mapping[RawLabel, list[str]],
    ratios: tuple[float, float, float],
    rng: np.random.Generator,
    groups: Mapping[str, str],
) -> tuple[list[str], list[str], list[str]]:
    """Greedy whole-group assignment targeting the per-class quotas."""
    for image_id in labels.entries:
        if image_id not in groups:
            raise DataError(f"image {image_id!r} has no group key")

    targets = {subset: {} for subset in SUBSETS}
    for label in RawLabel:
        n = len(by_class[label])
        if n == 0:
            continue
        if label is RawLabel.BOTH:
            quotas = (n, 0, 0)
        else:
            quotas = _largest_remainder_quotas(n, ratios)
        for subset, q in zip(SUBSETS, quotas):
            targets[subset][label] = q

    members: dict[str, list[str]] = {}
    for image_id in sorted(labels.entries):
        members.setdefault(groups[image_id], []).append(image_id)
    group_keys = sorted(members)
    order = rng.permutation(len(group_keys))
    # Largest groups first: they are the hardest to place.
    ordered = sorted(
        (group_keys[i] for i in order), key=lambda g: -len(members[g])
    )

    assigned: dict[Subset, dict[RawLabel, int]] = {
        subset: {label: 0 for label in RawLabel} for subset in SUBSETS
    }
    out: dict[Subset, list[str]] = {subset: [] for subset in SUBSETS}
    for key in ordered:
        counts = {label: 0 for label in RawLabel}
        for image_id in members[key]:
            counts[labels[image_id]] += 1
        if counts[RawLabel.BOTH] > 0:
            choice = Subset.TRAIN
        else:
            choice = max(
                SUBSETS,
                key=lambda s: sum(
                    min(
                        counts[label],
                        max(targets[s].get(label, 0) - assigned[s][label], 0),
                    )
                    - max(
                        counts[label]
                        - max(targets[s].get(label, 0) - assigned[s][label], 0),
                        0,
                    )
                    for label in RawLabel
                ),
            )
        out[choice].extend(members[key])
        for label, c in counts.items():
            assigned[choice][label] += c
    return out[Subset.TRAIN], out[Subset.VAL], out[Subset.TEST]
