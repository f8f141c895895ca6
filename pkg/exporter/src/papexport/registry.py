"""Supported backbone registry: published input resolutions and feature dims.

The five production entries mirror the benchmark configuration of this
model family; ``tiny`` is a small built-in CNN for smoke tests and
pipeline plumbing where no large pretrained checkpoint is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ExporterConfigError


@dataclass(frozen=True)
class BackboneSpec:
    model_id: str
    resolution: int
    embed_dim: int
    builder: str  # key into models.BUILDERS


SUPPORTED: dict[str, BackboneSpec] = {
    spec.model_id: spec
    for spec in (
        BackboneSpec("vit_l", 384, 1024, builder="torchvision_vit_l"),
        BackboneSpec("swinv2_b", 256, 1024, builder="torchvision_swin_v2_b"),
        BackboneSpec("swinv2_l", 384, 1536, builder="unavailable"),
        BackboneSpec("se_resnext", 288, 2048, builder="unavailable"),
        BackboneSpec("convnext_v2", 384, 2816, builder="unavailable"),
        BackboneSpec("tiny", 64, 32, builder="tiny"),
    )
}


def get_spec(model_id: str) -> BackboneSpec:
    try:
        return SUPPORTED[model_id]
    except KeyError:
        raise ExporterConfigError(
            f"unknown model {model_id!r}; known: {', '.join(sorted(SUPPORTED))}"
        ) from None


def list_supported_models() -> list[tuple[str, int, int]]:
    """(model id, input resolution, embedding dim) rows, sorted by id."""
    return [
        (spec.model_id, spec.resolution, spec.embed_dim)
        for spec in sorted(SUPPORTED.values(), key=lambda s: s.model_id)
    ]
