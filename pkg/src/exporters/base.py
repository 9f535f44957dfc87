"""
Base Exporter Interface

Abstract base class for artifact writers.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

from src.core.errors import ArtifactError


class BaseExporter(ABC):
    """Abstract base class for artifact exporters."""

    def __init__(self, output_directory: Path | str | None = None):
        """
        Initialize exporter.

        Args:
            output_directory: Directory used when no explicit path is given.
        """
        self.output_directory = Path(output_directory or "output")

    @property
    @abstractmethod
    def file_extension(self) -> str:
        """Get the file extension for this exporter."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Get the exporter name."""

    def _get_output_path(self, base_name: str) -> Path:
        return self.output_directory / f"{base_name}.{self.file_extension}"

    def _resolve(self, output_path: Path | str | None, base_name: str) -> Path:
        path = Path(output_path) if output_path else self._get_output_path(base_name)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"Cannot create directory {path.parent}: {e}") from e
        return path

    @abstractmethod
    def export(self, data: Any, output_path: Path | str | None = None) -> Path:
        """
        Write ``data`` to a file.

        Returns:
            Path to the exported file
        """
