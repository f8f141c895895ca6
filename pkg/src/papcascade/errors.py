"""Exception hierarchy shared across the pipeline.

``DataError`` covers everything wrong with ingested data or its coverage
(CLI exit code 1); ``ConfigError`` covers invalid parameters and flag
combinations (CLI exit code 2).
"""

from __future__ import annotations


class PapCascadeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PapCascadeError):
    """Invalid configuration or parameter value (usage error)."""


class DataError(PapCascadeError):
    """Invalid, inconsistent, or degenerate input data."""


class FormatError(DataError):
    """Malformed file content, annotated with its source location."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        location = ""
        if path is not None:
            location += str(path)
        if line is not None:
            location += f":{line}"
        super().__init__(f"{location}: {message}" if location else message)
        self.path = path
        self.line = line


class CoverageError(DataError):
    """Required predictions, folds, or calibrations are missing."""


class VoteTieError(DataError):
    """A majority vote tied and no tie-break rule was supplied."""
