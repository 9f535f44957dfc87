"""
Regression datasets, normalization and train/valid/test splits.

Split kinds:
- random: uniform permutation
- extrapolation: test = the rows with the smallest and largest input norms
- interpolation: test drawn from the central rows by input norm; the norm
  extremes are forced into training
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import DataValidationError, ShapeMismatchError

MIN_SPLIT_ROWS = 20
_EPS = 1e-9


def _as_matrix(values: Any, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeMismatchError(name, "(N, D)", arr.shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Paired inputs ``x`` (N, D_in) and targets ``y`` (N, D_out).

    One-dimensional arrays are promoted to a single column.
    """

    x: np.ndarray
    y: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        y = _as_matrix(self.y, "y")
        if x.shape[0] != y.shape[0]:
            raise ShapeMismatchError("y rows", x.shape[0], y.shape[0])
        if x.shape[0] < 1:
            raise DataValidationError("dataset must contain at least one row")
        for label, arr in (("x", x), ("y", y)):
            bad = np.argwhere(~np.isfinite(arr))
            if bad.size:
                row, col = bad[0]
                raise DataValidationError(
                    "non-finite value", row=int(row), column=f"{label}_{col}"
                )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def x_dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def y_dim(self) -> int:
        return int(self.y.shape[1])

    def __len__(self) -> int:
        return self.n

    def subset(self, rows: Sequence[int], name: Optional[str] = None) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(x=self.x[rows], y=self.y[rows], name=name or self.name)

    def column_names(self) -> Tuple[list, list]:
        return (
            [f"x_{i}" for i in range(self.x_dim)],
            [f"y_{j}" for j in range(self.y_dim)],
        )


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-column means and (population) standard deviations."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        """Normalize another dataset with these statistics."""
        return Dataset(
            x=(data.x - self.x_mean) / self.x_std,
            y=(data.y - self.y_mean) / self.y_std,
            name=data.name,
        )

    def x_to_normalized(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.x_mean) / self.x_std

    def y_to_original(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.y_std + self.y_mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_std": self.y_std.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NormStats":
        return cls(**{k: np.asarray(data[k], dtype=float) for k in cls.__annotations__})

    @classmethod
    def identity(cls, data: Dataset) -> "NormStats":
        return cls(
            x_mean=np.zeros(data.x_dim),
            x_std=np.ones(data.x_dim),
            y_mean=np.zeros(data.y_dim),
            y_std=np.ones(data.y_dim),
        )


def _column_stats(values: np.ndarray, prefix: str) -> Tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    constant = np.flatnonzero(std == 0)
    if constant.size:
        raise DataValidationError(
            "constant column cannot be normalized", column=f"{prefix}_{constant[0]}"
        )
    return mean, std


def normalize(data: Dataset) -> Tuple[Dataset, NormStats]:
    """
    Standardize every input and output column to zero mean, unit std.

    Raises:
        DataValidationError: If a column is constant.
    """
    x_mean, x_std = _column_stats(data.x, "x")
    y_mean, y_std = _column_stats(data.y, "y")
    stats = NormStats(x_mean=x_mean, x_std=x_std, y_mean=y_mean, y_std=y_std)
    return stats.apply(data), stats


def denormalize(data: Dataset, stats: NormStats) -> Dataset:
    """Inverse of ``normalize``."""
    return Dataset(
        x=data.x * stats.x_std + stats.x_mean,
        y=data.y * stats.y_std + stats.y_mean,
        name=data.name,
    )


class SplitKind(str, Enum):
    """How rows are assigned to train/valid/test."""

    RANDOM = "random"
    EXTRAPOLATION = "extrapolation"
    INTERPOLATION = "interpolation"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SplitSpec:
    """Split kind, fractions (summing to 1) and seed."""

    kind: SplitKind = SplitKind.RANDOM
    train: float = 0.8
    valid: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SplitKind(self.kind))
        total = self.train + self.valid + self.test
        if abs(total - 1.0) > _EPS:
            raise ValueError(f"split fractions must sum to 1, got {total}")
        if min(self.train, self.valid, self.test) <= 0:
            raise ValueError("split fractions must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": str(self.kind),
            "train": self.train,
            "valid": self.valid,
            "test": self.test,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SplitSpec":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class DataSplits:
    """Three disjoint parts plus the original row indices of each."""

    train: Dataset
    valid: Dataset
    test: Dataset
    train_idx: np.ndarray
    valid_idx: np.ndarray
    test_idx: np.ndarray

    def __iter__(self) -> Iterator[Dataset]:
        return iter((self.train, self.valid, self.test))


def _floor(value: float) -> int:
    return int(math.floor(value + _EPS))


def _ceil(value: float) -> int:
    return int(math.ceil(value - _EPS))


def split(data: Dataset, spec: SplitSpec) -> DataSplits:
    """
    Partition ``data`` into train/valid/test according to ``spec``.

    Raises:
        DataValidationError: If N is below 20 or a part would be empty.
    """
    n = data.n
    if n < MIN_SPLIT_ROWS:
        raise DataValidationError(
            f"need at least {MIN_SPLIT_ROWS} rows to split, got {n}"
        )

    rng = np.random.default_rng(spec.seed)
    norms = np.linalg.norm(data.x, axis=1)
    order = np.argsort(norms, kind="stable")

    if spec.kind is SplitKind.RANDOM:
        perm = rng.permutation(n)
        n_train = _floor(spec.train * n)
        n_valid = _floor(spec.valid * n)
        train_idx = perm[:n_train]
        valid_idx = perm[n_train : n_train + n_valid]
        test_idx = perm[n_train + n_valid :]

    elif spec.kind is SplitKind.EXTRAPOLATION:
        k = _ceil(spec.test / 2 * n)
        test_idx = np.concatenate([order[:k], order[n - k :]])
        rest = rng.permutation(order[k : n - k])
        n_train = _floor(len(rest) * spec.train / (spec.train + spec.valid))
        train_idx = rest[:n_train]
        valid_idx = rest[n_train:]

    else:
        k = _ceil(spec.test / 2 * n)
        extremes = np.concatenate([order[:k], order[n - k :]])
        central = order[k : n - k]
        n_train = _floor(spec.train * n)
        n_valid = _floor(spec.valid * n)
        n_test = n - n_train - n_valid
        if n_test > len(central) or n_train < len(extremes):
            raise DataValidationError("interpolation split is infeasible for this N")
        picked = rng.permutation(central)
        test_idx = picked[:n_test]
        remaining = picked[n_test:]
        n_extra = n_train - len(extremes)
        train_idx = np.concatenate([extremes, remaining[:n_extra]])
        valid_idx = remaining[n_extra:]

    parts = {"train": train_idx, "valid": valid_idx, "test": test_idx}
    for part, idx in parts.items():
        if len(idx) == 0:
            raise DataValidationError(f"{part} split would be empty (N={n})")

    train_idx, valid_idx, test_idx = (np.sort(idx) for idx in parts.values())
    return DataSplits(
        train=data.subset(train_idx, f"{data.name}:train"),
        valid=data.subset(valid_idx, f"{data.name}:valid"),
        test=data.subset(test_idx, f"{data.name}:test"),
        train_idx=train_idx,
        valid_idx=valid_idx,
        test_idx=test_idx,
    )
