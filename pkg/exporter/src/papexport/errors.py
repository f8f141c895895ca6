"""Exporter exception types."""

from __future__ import annotations


class ExporterError(Exception):
    """Base class for exporter failures."""


class ExporterConfigError(ExporterError):
    """Invalid exporter configuration (usage error, exit code 2)."""


class BackboneUnavailableError(ExporterError):
    """The requested architecture has no builder in this environment."""


class CheckpointError(ExporterError):
    """Checkpoint missing, unreadable, or shaped for a different model."""
