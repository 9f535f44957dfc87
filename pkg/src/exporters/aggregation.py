"""Shared document helpers for exporters.

Every JSON artifact starts with the same header (schema version, generator,
version, kind). Metrics documents carry no timestamp other than
``wall_clock_seconds`` so reruns can be compared field by field.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence

from src._version import __version__
from src.core.metrics import EvaluationReport
from src.core.models import FailureRecord

SCHEMA_VERSION = 1
GENERATOR = "proj-bnn"
VOLATILE_FIELDS = ("wall_clock_seconds",)


def build_header(kind: str, *, version: str = __version__) -> Dict[str, Any]:
    """Common header of every JSON artifact."""
    return {
        "schema_version": SCHEMA_VERSION,
        "generator": GENERATOR,
        "version": version,
        "kind": kind,
    }


def build_metrics_document(
    report: EvaluationReport,
    *,
    dataset: str,
    split_kind: str,
    seed: int,
    wall_clock_seconds: float,
    selected_cell: Optional[Dict[str, Any]] = None,
    grid: Optional[Sequence[Dict[str, Any]]] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Metrics document of one evaluated model."""
    document = build_header("metrics")
    document.update(
        {
            "dataset": dataset,
            "split_kind": split_kind,
            "seed": seed,
            **report.to_dict(),
        }
    )
    if selected_cell is not None:
        document["selected_cell"] = dict(selected_cell)
    if grid:
        document["grid"] = [dict(row) for row in grid]
    if extra:
        document.update(extra)
    document["wall_clock_seconds"] = round(float(wall_clock_seconds), 3)
    return document


def strip_volatile(document: Dict[str, Any]) -> Dict[str, Any]:
    """Copy of a document without run-time dependent fields."""
    return {k: v for k, v in document.items() if k not in VOLATILE_FIELDS}


def build_failure_document(
    record: FailureRecord, completed_stages: List[str]
) -> Dict[str, Any]:
    """Content of the FAILED.json marker."""
    document = build_header("failure")
    document["failure"] = record.to_dict()
    document["completed_stages"] = list(completed_stages)
    return document
