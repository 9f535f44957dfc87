"""
Exception hierarchy for Proj-BNN.

Every error raised on purpose by the library derives from ``ProjBNNError``
so callers (the CLI in particular) can separate expected failures from bugs.
"""

from __future__ import annotations

from typing import Optional, Sequence

from ..utils.config import ConfigError


class ProjBNNError(Exception):
    """Base class for library errors."""


class ShapeMismatchError(ProjBNNError, ValueError):
    """Raised when an array does not have the shape an operation expects."""

    def __init__(
        self,
        what: str,
        expected: Sequence[int] | int | str,
        actual: Sequence[int] | int | str,
    ):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected shape {expected}, got {actual}")


class NonFiniteError(ProjBNNError, FloatingPointError):
    """
    Raised when a loss, gradient or weight becomes NaN/inf.

    Attributes:
        stage: Pipeline stage (fge, pcae, vi, meta, eval...).
        operation: Operation that produced the value.
        iteration: Optimizer iteration, when inside a training loop.
        sample_index: Monte Carlo sample index, when known.
    """

    def __init__(
        self,
        operation: str,
        stage: str = "",
        iteration: Optional[int] = None,
        sample_index: Optional[int] = None,
        detail: str = "",
    ):
        self.operation = operation
        self.stage = stage
        self.iteration = iteration
        self.sample_index = sample_index
        self.detail = detail

        parts = [f"non-finite value in {operation}"]
        if stage:
            parts.append(f"stage={stage}")
        if iteration is not None:
            parts.append(f"iteration={iteration}")
        if sample_index is not None:
            parts.append(f"sample={sample_index}")
        if detail:
            parts.append(detail)
        super().__init__(", ".join(parts))


class DataValidationError(ProjBNNError, ValueError):
    """Raised for malformed datasets; carries the offending row/column."""

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        column: Optional[str] = None,
    ):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")


class FingerprintMismatchError(ProjBNNError, ValueError):
    """Raised when weights or artifacts belong to a different architecture."""

    def __init__(self, expected: str, actual: str, what: str = "weights"):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{what} fingerprint mismatch: expected {expected}, got {actual}"
        )


class ArtifactError(ProjBNNError, OSError):
    """Raised when an artifact file is missing or malformed."""


__all__ = [
    "ArtifactError",
    "ConfigError",
    "DataValidationError",
    "FingerprintMismatchError",
    "NonFiniteError",
    "ProjBNNError",
    "ShapeMismatchError",
]
