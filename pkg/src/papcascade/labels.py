"""Label taxonomy for the two-stage cell classification task.

Ground truth arrives as one of four raw annotations. Stage 1 sees a binary
grouping (rubbish vs suitable), stage 2 a two-flag multi-label target, and
the cascade as a whole can only ever emit one of three final labels: images
annotated as containing both healthy and unhealthy cells are used for
training only and never appear at inference time.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import DataError


class RawLabel(enum.Enum):
    """Expert annotation attached to a single image."""

    RUBBISH = "rubbish"
    HEALTHY = "healthy"
    UNHEALTHY = "unhealthy"
    BOTH = "both"


class Stage1Label(enum.Enum):
    """Binary target of the first stage: unusable image or not."""

    RUBBISH = "rubbish"
    SUITABLE = "suitable"


class Stage2Label(enum.Enum):
    """Single-label decision emitted by the second stage."""

    HEALTHY = "healthy"
    UNHEALTHY = "unhealthy"


class FinalLabel(enum.Enum):
    """The only labels the cascade can output."""

    RUBBISH = "rubbish"
    HEALTHY = "healthy"
    UNHEALTHY = "unhealthy"


#: Canonical class order used by confusion matrices and reports.
FINAL_CLASSES: tuple[FinalLabel, ...] = (
    FinalLabel.RUBBISH,
    FinalLabel.HEALTHY,
    FinalLabel.UNHEALTHY,
)


@dataclass(frozen=True)
class Stage2Target:
    """Multi-label training target for non-rubbish images.

    Both flags may be set simultaneously; at least one always is.
    """

    healthy: bool
    unhealthy: bool

    def __post_init__(self) -> None:
        if not (self.healthy or self.unhealthy):
            raise DataError("Stage2Target requires at least one of healthy/unhealthy")


def map_stage1_label(raw: RawLabel) -> Stage1Label:
    """Group the four raw annotations into the stage-1 binary target."""
    if raw is RawLabel.RUBBISH:
        return Stage1Label.RUBBISH
    return Stage1Label.SUITABLE


def map_stage2_target(raw: RawLabel) -> Stage2Target:
    """Derive the stage-2 multi-label target; undefined for rubbish images."""
    if raw is RawLabel.RUBBISH:
        raise DataError("stage-2 target is undefined for rubbish images")
    if raw is RawLabel.HEALTHY:
        return Stage2Target(healthy=True, unhealthy=False)
    if raw is RawLabel.UNHEALTHY:
        return Stage2Target(healthy=False, unhealthy=True)
    return Stage2Target(healthy=True, unhealthy=True)


def final_label_from_raw(raw: RawLabel) -> FinalLabel:
    """Map a test-time annotation onto the cascade's output space.

    Raises for ``both``: such images are confined to training splits and
    have no single ground-truth final label.
    """
    if raw is RawLabel.BOTH:
        raise DataError("images labeled 'both' have no final evaluation label")
    return FinalLabel(raw.value)
