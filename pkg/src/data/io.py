"""
CSV reading and writing for datasets.

Files carry a header of ``x_0..x_{D-1}`` input columns and ``y_0..``
output columns. Task sets add an integer ``task`` column and a JSON
manifest with each task's amplitude and phase.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd

from ..core.errors import ArtifactError, DataValidationError
from ..core.network import Architecture
from ..utils.logging import get_logger
from .dataset import Dataset
from .generators import SineTaskSpec, TaskSet

logger = get_logger(__name__)

_COLUMN_RE = re.compile(r"^(x|y)_(\d+)$")
TASK_COLUMN = "task"


def _ordered_columns(columns: List[str]) -> Tuple[List[str], List[str]]:
    xs, ys = [], []
    for col in columns:
        match = _COLUMN_RE.match(str(col).strip())
        if match is None:
            continue
        (xs if match.group(1) == "x" else ys).append((int(match.group(2)), col))
    return [c for _, c in sorted(xs)], [c for _, c in sorted(ys)]


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise ArtifactError(f"Data file not found: {path}")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise DataValidationError(f"empty CSV file: {path}") from e
    except pd.errors.ParserError as e:
        raise DataValidationError(f"malformed CSV file {path}: {e}") from e


def _parse_float(cell: str) -> float:
    # float() is correctly rounded, so "%.17g" text reads back bit-exact
    try:
        return float(cell)
    except ValueError:
        return float("nan")


def _numeric_block(frame: pd.DataFrame, columns: List[str]) -> np.ndarray:
    """Convert columns to float, reporting the first bad cell (1-based data row)."""
    block = np.empty((len(frame), len(columns)))
    for j, col in enumerate(columns):
        raw = frame[col].str.strip()
        values = np.array([_parse_float(cell) for cell in raw], dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            row = int(bad[0])
            raise DataValidationError(
                f"non-numeric or non-finite value '{raw.iloc[row]}'",
                row=row + 1,
                column=col,
            )
        block[:, j] = values
    return block


def load_csv(path: str | Path, name: str = "") -> Dataset:
    """
    Load a dataset from CSV.

    Raises:
        DataValidationError: On a missing header, non-numeric cell or NaN;
            the error carries the data row (1-based) and column.
    """
    path = Path(path)
    frame = _read_frame(path)
    x_cols, y_cols = _ordered_columns(list(frame.columns))
    if not x_cols or not y_cols:
        raise DataValidationError(
            f"missing header: expected x_0.. and y_0.. columns in {path}"
        )
    extra = [c for c in frame.columns if c not in x_cols + y_cols and c != TASK_COLUMN]
    if extra:
        logger.warning(f"Ignoring unrecognized columns in {path.name}: {extra}")
    if len(frame) == 0:
        raise DataValidationError(f"no data rows in {path}")

    x = _numeric_block(frame, x_cols)
    y = _numeric_block(frame, y_cols)
    return Dataset(x=x, y=y, name=name or path.stem)


def _frame(data: Dataset) -> pd.DataFrame:
    x_names, y_names = data.column_names()
    return pd.DataFrame(
        np.hstack([data.x, data.y]), columns=x_names + y_names
    )


def write_csv(data: Dataset, path: str | Path) -> Path:
    """Write a dataset with an ``x_i``/``y_j`` header (full float precision)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _frame(data).to_csv(path, index=False, float_format="%.17g")
    return path


def write_task_set(tasks: TaskSet, path: str | Path) -> Tuple[Path, Path]:
    """Write all tasks to one CSV with a ``task`` column plus ``<stem>.tasks.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = []
    for m, task in enumerate(tasks.tasks):
        frame = _frame(task)
        frame.insert(0, TASK_COLUMN, m)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")

    manifest_path = path.with_suffix(".tasks.json")
    manifest = {
        "n_tasks": len(tasks),
        "target_arch": tasks.target_arch.to_dict(),
        "tasks": [spec.to_dict() for spec in tasks.specs],
    }
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path, manifest_path


def load_task_set(path: str | Path) -> TaskSet:
    """Inverse of ``write_task_set``; the manifest must sit next to the CSV."""
    path = Path(path)
    manifest_path = path.with_suffix(".tasks.json")
    if not manifest_path.exists():
        raise ArtifactError(f"Task manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    frame = _read_frame(path)
    if TASK_COLUMN not in frame.columns:
        raise DataValidationError(f"missing '{TASK_COLUMN}' column in {path}")
    x_cols, y_cols = _ordered_columns(list(frame.columns))
    task_ids = _numeric_block(frame, [TASK_COLUMN]).astype(int)[:, 0]
    x = _numeric_block(frame, x_cols)
    y = _numeric_block(frame, y_cols)

    tasks = [
        Dataset(x=x[task_ids == m], y=y[task_ids == m], name=f"sine-{m + 1}")
        for m in range(int(manifest["n_tasks"]))
    ]
    return TaskSet(
        tasks=tasks,
        target_arch=Architecture.from_dict(manifest["target_arch"]),
        specs=[SineTaskSpec(**spec) for spec in manifest.get("tasks", [])],
    )
