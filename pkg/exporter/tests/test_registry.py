import pytest

from papexport.errors import ExporterConfigError
from papexport.registry import get_spec, list_supported_models

# (model id, input resolution, embedding dim) as published for this family
PUBLISHED = {
    "vit_l": (384, 1024),
    "swinv2_b": (256, 1024),
    "swinv2_l": (384, 1536),
    "se_resnext": (288, 2048),
    "convnext_v2": (384, 2816),
}


def test_registry_matches_published_values_exactly():
    rows = {mid: (res, dim) for mid, res, dim in list_supported_models()}
    for model_id, expected in PUBLISHED.items():
        assert rows[model_id] == expected


def test_tiny_test_backbone_present():
    rows = {mid: (res, dim) for mid, res, dim in list_supported_models()}
    assert "tiny" in rows


def test_unknown_id_rejected():
    with pytest.raises(ExporterConfigError, match="unknown model"):
        get_spec("resnet18")


def test_spec_lookup():
    spec = get_spec("convnext_v2")
    assert spec.resolution == 384
    assert spec.embed_dim == 2816
