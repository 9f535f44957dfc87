"""
CSV Exporter

Plot-ready tables: snapshots, predictive bands, latent-grid decodes and
generic column tables (PCA projections, per-sample log-likelihoods,
decoder draws, grid-search results).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm

from src.core.errors import ArtifactError, DataValidationError, FingerprintMismatchError
from src.core.metrics import Bands
from src.core.models import SnapshotSet
from src.core.multitask import LatentGrid
from src.core.network import Architecture
from src.exporters.aggregation import build_header
from src.exporters.base import BaseExporter
from src.utils.logging import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"


class CSVExporter(BaseExporter):
    """Write a mapping of equal-length columns as CSV."""

    def __init__(
        self,
        output_directory: Path | str | None = None,
        base_name: str = "table",
        delimiter: str = ",",
    ):
        super().__init__(output_directory)
        self.base_name = base_name
        self.delimiter = delimiter

    @property
    def file_extension(self) -> str:
        return "csv"

    @property
    def name(self) -> str:
        return "CSV"

    def _write_frame(self, frame: pd.DataFrame, output_path: Path | str | None) -> Path:
        path = self._resolve(output_path, self.base_name)
        try:
            frame.to_csv(
                path, index=False, sep=self.delimiter, float_format=FLOAT_FORMAT
            )
        except OSError as e:
            raise ArtifactError(f"Cannot write {path}: {e}") from e
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return path

    def export(
        self, data: Mapping[str, Any], output_path: Path | str | None = None
    ) -> Path:
        columns = {key: np.asarray(value).reshape(-1) for key, value in data.items()}
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have different lengths: {sorted(lengths)}")
        return self._write_frame(pd.DataFrame(columns), output_path)


class TSVExporter(CSVExporter):
    """Tab-separated variant."""

    def __init__(self, output_directory: Path | str | None = None, base_name: str = "table"):
        super().__init__(output_directory, base_name, delimiter="\t")

    @property
    def file_extension(self) -> str:
        return "tsv"

    @property
    def name(self) -> str:
        return "TSV"


def matrix_columns(prefix: str, matrix: np.ndarray) -> dict[str, np.ndarray]:
    """``{prefix_0: col0, prefix_1: col1, ...}`` for a 2-D array."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    return {f"{prefix}_{j}": matrix[:, j] for j in range(matrix.shape[1])}


class SnapshotCSVExporter(CSVExporter):
    """
    Snapshot table ``harvest_index, valid_rmse, w_0..w_{D_w-1}``.

    The target architecture goes to a ``<stem>.arch.json`` sidecar so the
    weights can be checked against it on reload.
    """

    def __init__(self, output_directory: Path | str | None = None):
        super().__init__(output_directory, base_name="snapshots")

    def export(
        self,
        data: Tuple[SnapshotSet, Architecture],
        output_path: Path | str | None = None,
    ) -> Path:
        snapshots, arch = data
        snapshots.check_fingerprint(arch.fingerprint)
        columns = {
            "harvest_index": snapshots.harvest_index,
            "valid_rmse": snapshots.valid_rmse,
            **matrix_columns("w", snapshots.matrix),
        }
        path = self._write_frame(pd.DataFrame(columns), output_path)
        sidecar = {
            **build_header("snapshots"),
            "target_arch": arch.to_dict(),
            "target_arch_fingerprint": arch.fingerprint,
            "count": len(snapshots),
        }
        path.with_suffix(".arch.json").write_text(
            json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
        )
        return path


def read_snapshots(
    path: Path | str, target_arch: Optional[Architecture] = None
) -> Tuple[SnapshotSet, Architecture]:
    """Reload a snapshot table and its architecture sidecar."""
    path = Path(path)
    sidecar = path.with_suffix(".arch.json")
    if not path.exists():
        raise ArtifactError(f"Snapshot file not found: {path}")
    if not sidecar.exists():
        raise ArtifactError(f"Snapshot architecture file not found: {sidecar}")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    arch = Architecture.from_dict(meta["target_arch"])
    if target_arch is not None and target_arch.fingerprint != arch.fingerprint:
        raise FingerprintMismatchError(target_arch.fingerprint, arch.fingerprint, "snapshots")

    frame = pd.read_csv(path, float_precision="round_trip")
    weight_cols = [f"w_{j}" for j in range(arch.num_params)]
    missing = [c for c in ["valid_rmse", *weight_cols] if c not in frame.columns]
    if missing:
        raise DataValidationError("snapshot file lacks columns", column=missing[0])
    snapshots = SnapshotSet(
        matrix=frame[weight_cols].to_numpy(dtype=float),
        valid_rmse=frame["valid_rmse"].to_numpy(dtype=float),
        arch_fingerprint=arch.fingerprint,
        harvest_index=frame["harvest_index"].to_numpy(dtype=int)
        if "harvest_index" in frame.columns
        else None,
    )
    return snapshots, arch


class BandsCSVExporter(CSVExporter):
    """Predictive bands: x, mean, q_low, q_high, total_std, y_low, y_high, q_<level>."""

    def __init__(self, output_directory: Path | str | None = None):
        super().__init__(output_directory, base_name="bands")

    def export(self, data: Bands, output_path: Path | str | None = None) -> Path:
        return super().export(data.to_columns(), output_path)


class GridCSVExporter(CSVExporter):
    """Latent-grid decodes: u, v, z0, z1, f_0..f_{G-1} (one row per grid cell)."""

    def __init__(self, output_directory: Path | str | None = None):
        super().__init__(output_directory, base_name="latent_grid")

    def export(self, data: LatentGrid, output_path: Path | str | None = None) -> Path:
        columns = {
            "u": norm.cdf(data.z[:, 0]),
            "v": norm.cdf(data.z[:, 1]),
            "z0": data.z[:, 0],
            "z1": data.z[:, 1],
            **matrix_columns("f", data.curves),
        }
        return self._write_frame(pd.DataFrame(columns), output_path)


def write_rows(rows: Sequence[Mapping[str, Any]], path: Path | str) -> Path:
    """Write a list of flat records (e.g. the grid-search table)."""
    exporter = CSVExporter(base_name=Path(path).stem)
    return exporter._write_frame(pd.DataFrame(list(rows)), path)
