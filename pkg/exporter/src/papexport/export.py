"""Batch inference over an image manifest, emitting the pipeline CSV format.

Output rows are ordered by image id regardless of batch composition, so a
given checkpoint and manifest always produce byte-identical files.
Undecodable images are skipped and reported in a sidecar manifest rather
than aborting the export.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .errors import ExporterConfigError
from .models import STAGE_OUTPUTS, build_from_checkpoint
from .preprocess import NORMALIZATIONS, RESIZE_MODES, load_image, to_tensor
from .registry import get_spec

log = logging.getLogger("papexport")

PREDICTION_HEADER = ["image_id", "model_id", "fold", "stage", "p1", "p2"]
SKIPPED_HEADER = ["image_id", "reason"]


@dataclass(frozen=True)
class ExporterConfig:
    model: str
    stage: str
    fold: int
    checkpoint: str
    resolution: int | None = None  # defaults to the registry value
    normalization: str = "imagenet"
    resize_mode: str = "resize"
    batch_size: int = 16
    device: str = "cpu"

    def validate(self) -> "ExporterConfig":
        spec = get_spec(self.model)
        if self.stage not in STAGE_OUTPUTS:
            raise ExporterConfigError(
                f"stage must be one of {sorted(STAGE_OUTPUTS)}, got {self.stage!r}"
            )
        if self.fold < 1:
            raise ExporterConfigError(f"fold must be >= 1, got {self.fold}")
        if self.resolution is not None and self.resolution != spec.resolution:
            raise ExporterConfigError(
                f"model {self.model!r} expects resolution {spec.resolution}, "
                f"config says {self.resolution}"
            )
        if self.batch_size < 1:
            raise ExporterConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.resize_mode not in RESIZE_MODES:
            raise ExporterConfigError(f"resize_mode must be one of {RESIZE_MODES}")
        if self.normalization not in NORMALIZATIONS:
            raise ExporterConfigError(f"normalization must be one of {NORMALIZATIONS}")
        return self

    @property
    def effective_resolution(self) -> int:
        return self.resolution or get_spec(self.model).resolution


@dataclass
class ExportResult:
    rows: int
    skipped: list[tuple[str, str]] = field(default_factory=list)


def read_manifest(path: str | Path) -> list[tuple[str, str]]:
    """Parse the `image_id,path` manifest; ids must be unique."""
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as handle:
        rows = csv.reader(handle)
        header = next(rows, None)
        if header is None or [h.strip() for h in header] != ["image_id", "path"]:
            raise ExporterConfigError(f"{path}: manifest header must be image_id,path")
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0].strip():
                raise ExporterConfigError(f"{path}:{lineno}: bad manifest row {row!r}")
            image_id, image_path = row[0].strip(), row[1].strip()
            if image_id in seen:
                raise ExporterConfigError(f"{path}:{lineno}: duplicate id {image_id!r}")
            seen.add(image_id)
            entries.append((image_id, image_path))
    if not entries:
        raise ExporterConfigError(f"{path}: manifest has no rows")
    return entries


def export_probabilities(
    config: ExporterConfig,
    manifest: list[tuple[str, str]],
    out_csv: str | Path,
    skipped_csv: str | Path | None = None,
) -> ExportResult:
    """Run the checkpointed model over the manifest and write probabilities."""
    config.validate()
    model = build_from_checkpoint(config.model, config.stage, config.checkpoint)
    model.to(config.device)
    resolution = config.effective_resolution

    ordered = sorted(manifest)  # fixed output order, independent of loader
    tensors: list[torch.Tensor] = []
    kept_ids: list[str] = []
    skipped: list[tuple[str, str]] = []
    for image_id, path in ordered:
        try:
            img = load_image(path)
        except (OSError, ValueError) as exc:
            reason = str(exc).splitlines()[0] if str(exc) else exc.__class__.__name__
            log.warning("skipping %s: %s", image_id, reason)
            skipped.append((image_id, reason))
            continue
        tensors.append(
            to_tensor(img, resolution, config.resize_mode, config.normalization)
        )
        kept_ids.append(image_id)

    probs: list[torch.Tensor] = []
    with torch.no_grad():
        for start in range(0, len(tensors), config.batch_size):
            batch = torch.stack(tensors[start : start + config.batch_size]).to(
                config.device
            )
            probs.append(torch.sigmoid(model(batch)).cpu())
    values = torch.cat(probs) if probs else torch.empty((0, STAGE_OUTPUTS[config.stage]))

    with open(out_csv, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PREDICTION_HEADER)
        for i, image_id in enumerate(kept_ids):
            row = values[i]
            if config.stage == "stage1":
                writer.writerow(
                    [image_id, config.model, config.fold, "stage1", repr(float(row[0])), ""]
                )
            else:
                writer.writerow(
                    [
                        image_id,
                        config.model,
                        config.fold,
                        "stage2",
                        repr(float(row[0])),
                        repr(float(row[1])),
                    ]
                )

    if skipped_csv is not None:
        with open(skipped_csv, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(SKIPPED_HEADER)
            writer.writerows(skipped)

    log.info("exported %d rows (%d skipped) to %s", len(kept_ids), len(skipped), out_csv)
    return ExportResult(rows=len(kept_ids), skipped=skipped)
