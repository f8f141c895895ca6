"""Backbone + head construction and checkpoint handling.

A model here is a feature backbone followed by a small MLP head emitting
one logit (stage 1, rubbish) or two (stage 2, healthy/unhealthy). Heads
are sigmoid-activated downstream; this module stops at logits. Weights
always come from a user-provided checkpoint: no pretrained downloads.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn

from .errors import BackboneUnavailableError, CheckpointError
from .registry import BackboneSpec, get_spec

STAGE_OUTPUTS = {"stage1": 1, "stage2": 2}


class TinyBackbone(nn.Module):
    """Small CNN used for tests and plumbing; input size agnostic."""

    def __init__(self, embed_dim: int = 32):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(16, embed_dim, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x)


def _build_tiny() -> nn.Module:
    return TinyBackbone(embed_dim=32)


def _build_torchvision_vit_l() -> nn.Module:
    from torchvision.models import vit_l_16

    model = vit_l_16(weights=None, image_size=384)
    model.heads = nn.Identity()
    return model


def _build_torchvision_swin_v2_b() -> nn.Module:
    from torchvision.models import swin_v2_b

    model = swin_v2_b(weights=None)
    model.head = nn.Identity()
    return model


BUILDERS = {
    "tiny": _build_tiny,
    "torchvision_vit_l": _build_torchvision_vit_l,
    "torchvision_swin_v2_b": _build_torchvision_swin_v2_b,
}


class ClassifierHead(nn.Module):
    """Lightweight MLP from backbone features to stage logits."""

    def __init__(self, embed_dim: int, out_dim: int, hidden: int = 256):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(embed_dim, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, out_dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class ExportModel(nn.Module):
    def __init__(self, backbone: nn.Module, head: nn.Module):
        super().__init__()
        self.backbone = backbone
        self.head = head

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


def build_model(spec: BackboneSpec, stage: str) -> ExportModel:
    if stage not in STAGE_OUTPUTS:
        raise CheckpointError(f"unknown stage {stage!r}")
    if spec.builder == "unavailable" or spec.builder not in BUILDERS:
        raise BackboneUnavailableError(
            f"model {spec.model_id!r} has no architecture implementation in this "
            "environment; export requires a backbone builder plus a fine-tuned "
            "checkpoint"
        )
    backbone = BUILDERS[spec.builder]()
    head = ClassifierHead(spec.embed_dim, STAGE_OUTPUTS[stage])
    return ExportModel(backbone, head)


def save_checkpoint(model: ExportModel, path: str | Path) -> None:
    torch.save({"state_dict": model.state_dict()}, str(path))


def load_checkpoint(model: ExportModel, path: str | Path) -> ExportModel:
    """Load weights strictly; any mismatch is a checkpoint error."""
    try:
        payload = torch.load(str(path), map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    state = payload.get("state_dict", payload) if isinstance(payload, dict) else payload
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint {path} does not fit the model: {exc}") from None
    model.eval()
    return model


def build_from_checkpoint(model_id: str, stage: str, checkpoint: str | Path) -> ExportModel:
    model = build_model(get_spec(model_id), stage)
    return load_checkpoint(model, checkpoint)
