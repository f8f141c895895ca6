from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from papcascade.labels import RawLabel
from papcascade.tables import LabelTable


@pytest.fixture
def small_labels() -> LabelTable:
    entries = {}
    spec = [
        (RawLabel.RUBBISH, 40),
        (RawLabel.HEALTHY, 40),
        (RawLabel.UNHEALTHY, 15),
        (RawLabel.BOTH, 5),
    ]
    i = 0
    for label, count in spec:
        for _ in range(count):
            entries[f"img_{i:04d}"] = label
            i += 1
    return LabelTable(entries)
