"""Exception types shared across the toolkit."""

from __future__ import annotations


class DefShiftError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DefShiftError):
    """Invalid run configuration or an unregistered language/template."""


class FormatError(DefShiftError):
    """A data file does not match its declared format.

    Carries the path and 1-based line number when they are known, so that
    malformed records can be located in large JSON-lines / TSV files.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class ServiceError(DefShiftError):
    """An external definition/embedding service failed beyond tolerance."""


class UndefinedScoreError(DefShiftError):
    """A change score is undefined for a word (e.g. one period has no usages)."""


class InsufficientDataError(DefShiftError):
    """Not enough aligned items to compute a statistic."""


class StageError(DefShiftError):
    """A pipeline stage failed; carries the stage name for the error message."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {message}")
