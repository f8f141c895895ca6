from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from papexport.models import build_model, save_checkpoint
from papexport.registry import get_spec


def make_images(root: Path, n: int, seed: int = 0) -> list[tuple[str, str]]:
    """Write n small random RGB images; returns manifest entries."""
    rng = np.random.default_rng(seed)
    entries = []
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        image_id = f"cell_{i:04d}"
        size = (int(rng.integers(40, 90)), int(rng.integers(40, 90)))
        array = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
        path = root / f"{image_id}.png"
        Image.fromarray(array).save(path)
        entries.append((image_id, str(path)))
    return entries


def write_manifest(path: Path, entries: list[tuple[str, str]]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["image_id", "path"])
        writer.writerows(entries)
    return path


def make_checkpoint(path: Path, stage: str, seed: int = 7, zero_head: bool = False) -> Path:
    torch.manual_seed(seed)
    model = build_model(get_spec("tiny"), stage)
    if zero_head:
        final = model.head.net[-1]
        torch.nn.init.zeros_(final.weight)
        torch.nn.init.zeros_(final.bias)
    save_checkpoint(model, path)
    return path


@pytest.fixture(scope="session")
def image_folder(tmp_path_factory):
    root = tmp_path_factory.mktemp("images")
    entries = make_images(root / "imgs", 50, seed=3)
    manifest = write_manifest(root / "manifest.csv", entries)
    return root, manifest, entries
