"""Deterministic inference-time preprocessing.

No augmentation ever happens here: export runs plain resize (default) or
center crop, converts to float, and optionally normalizes with the
ImageNet statistics pretrained backbones expect.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import ExporterConfigError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

RESIZE_MODES = ("resize", "center-crop")
NORMALIZATIONS = ("imagenet", "none")


def load_image(path: str | Path) -> Image.Image:
    """Decode to RGB; raises OSError/ValueError on undecodable input."""
    with Image.open(path) as img:
        return img.convert("RGB")


def _center_crop(img: Image.Image, resolution: int) -> Image.Image:
    w, h = img.size
    scale = resolution / min(w, h)
    img = img.resize(
        (max(resolution, round(w * scale)), max(resolution, round(h * scale))),
        Image.Resampling.BILINEAR,
    )
    w, h = img.size
    left = (w - resolution) // 2
    top = (h - resolution) // 2
    return img.crop((left, top, left + resolution, top + resolution))


def to_tensor(
    img: Image.Image,
    resolution: int,
    resize_mode: str = "resize",
    normalization: str = "imagenet",
) -> torch.Tensor:
    """CHW float32 tensor at the backbone's input resolution."""
    if resize_mode not in RESIZE_MODES:
        raise ExporterConfigError(f"resize_mode must be one of {RESIZE_MODES}")
    if normalization not in NORMALIZATIONS:
        raise ExporterConfigError(f"normalization must be one of {NORMALIZATIONS}")
    if resize_mode == "resize":
        img = img.resize((resolution, resolution), Image.Resampling.BILINEAR)
    else:
        img = _center_crop(img, resolution)
    array = np.asarray(img, dtype=np.float32) / 255.0
    if normalization == "imagenet":
        array = (array - np.array(IMAGENET_MEAN, dtype=np.float32)) / np.array(
            IMAGENET_STD, dtype=np.float32
        )
    return torch.from_numpy(array.transpose(2, 0, 1).copy())
