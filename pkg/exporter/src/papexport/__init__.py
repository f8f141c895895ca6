"""Vision-backbone batch inference exporting cascade-pipeline CSV tables."""

from .errors import (
    BackboneUnavailableError,
    CheckpointError,
    ExporterConfigError,
    ExporterError,
)
from .export import ExporterConfig, ExportResult, export_probabilities, read_manifest
from .models import (
    ClassifierHead,
    ExportModel,
    TinyBackbone,
    build_from_checkpoint,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from .registry import SUPPORTED, BackboneSpec, get_spec, list_supported_models

__version__ = "0.1.0"
