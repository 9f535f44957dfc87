"""
Exporters Package

Writers and readers for run artifacts: JSON documents (metrics, decoder,
model, failure marker) and CSV tables (snapshots, bands, latent grids).
"""

from src.exporters.aggregation import (
    SCHEMA_VERSION,
    build_header,
    build_metrics_document,
    strip_volatile,
)
from src.exporters.base import BaseExporter
from src.exporters.csv_export import (
    BandsCSVExporter,
    CSVExporter,
    GridCSVExporter,
    SnapshotCSVExporter,
    TSVExporter,
    read_snapshots,
    write_rows,
)
from src.exporters.json_export import (
    FAILURE_MARKER,
    JSONExporter,
    LoadedModel,
    load_decoder,
    load_model,
    read_document,
    read_failure,
    save_decoder,
    save_model,
    write_failure,
)

__all__ = [
    "FAILURE_MARKER",
    "SCHEMA_VERSION",
    "BandsCSVExporter",
    "BaseExporter",
    "CSVExporter",
    "GridCSVExporter",
    "JSONExporter",
    "LoadedModel",
    "SnapshotCSVExporter",
    "TSVExporter",
    "build_header",
    "build_metrics_document",
    "get_exporter",
    "load_decoder",
    "load_model",
    "read_document",
    "read_failure",
    "read_snapshots",
    "save_decoder",
    "save_model",
    "strip_volatile",
    "write_failure",
    "write_rows",
]


def get_exporter(format_type: str, output_directory=None, **kwargs) -> BaseExporter:
    """
    Factory function to get an exporter by format type.

    Args:
        format_type: Export format (json, csv, tsv, snapshots, bands, grid)
        output_directory: Directory for files written without an explicit path
        **kwargs: Additional exporter-specific arguments

    Returns:
        Appropriate exporter instance

    Raises:
        ValueError: If format type is not supported
    """
    exporters = {
        "json": JSONExporter,
        "csv": CSVExporter,
        "tsv": TSVExporter,
        "snapshots": SnapshotCSVExporter,
        "bands": BandsCSVExporter,
        "grid": GridCSVExporter,
    }

    format_lower = format_type.lower()

    if format_lower not in exporters:
        supported = ", ".join(sorted(exporters))
        raise ValueError(
            f"Unsupported export format: {format_type}. Supported: {supported}"
        )

    return exporters[format_lower](output_directory, **kwargs)
