"""
Data models for Proj-BNN.

This module contains the value types shared between stages:
- Method, FailureStage: string enums used in artifacts and logs
- FailureRecord: what went wrong, where (written as FAILED.json)
- ObservationModel, PriorSpec: the fixed likelihood and prior
- MeanFieldGaussian, PointMass: variational families
- SnapshotSet: harvested weight snapshots with validation RMSE
- TrainingTrace: per-iteration ELBO and validation checks
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import FingerprintMismatchError, NonFiniteError, ShapeMismatchError


class Method(str, Enum):
    """Inference method tag stored in model artifacts."""

    PROJBNN = "projbnn"
    BBB = "bbb"
    LINEAR = "linear"
    ONE_STAGE = "one_stage"
    QZ_ONLY = "qz_only"
    FGE = "fge"
    META = "meta"

    def __str__(self) -> str:
        return self.value

    @property
    def is_projected(self) -> bool:
        """True for methods that sample weights through a decoder."""
        return self in (
            Method.PROJBNN,
            Method.LINEAR,
            Method.ONE_STAGE,
            Method.QZ_ONLY,
            Method.META,
        )


class FailureStage(str, Enum):
    """Stage at which a failure occurred."""

    DATA = "data"
    FGE = "fge"
    PCAE = "pcae"
    VI = "vi"
    META = "meta"
    EVAL = "eval"
    EXPORT = "export"

    def __str__(self) -> str:
        return self.value


@dataclass
class FailureRecord:
    """
    Record of a failed pipeline run.

    Attributes:
        stage: Stage at which failure occurred.
        error_type: Type/class of the error.
        message: Error message.
        seed: Run seed.
        method: Inference method of the run.
        iteration: Optimizer iteration, for non-finite training values.
        sample_index: Monte Carlo sample index, when known.
        timestamp: When the failure occurred.
    """

    stage: FailureStage
    error_type: str
    message: str
    seed: Optional[int] = None
    method: str = ""
    iteration: Optional[int] = None
    sample_index: Optional[int] = None
    timestamp: Optional[datetime] = None

    def __post_init__(self):
        if self.timestamp is None:
            self.timestamp = datetime.now()

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "stage": str(self.stage),
            "error_type": self.error_type,
            "message": self.message,
            "seed": self.seed,
            "method": self.method,
            "iteration": self.iteration,
            "sample_index": self.sample_index,
            "timestamp": self.timestamp.isoformat() if self.timestamp else None,
        }

    @classmethod
    def from_exception(
        cls,
        stage: FailureStage,
        error: Exception,
        seed: Optional[int] = None,
        method: str = "",
    ) -> "FailureRecord":
        """Create a failure record from an exception while keeping schema stable."""
        return cls(
            stage=stage,
            error_type=type(error).__name__,
            message=str(error),
            seed=seed,
            method=method,
            iteration=getattr(error, "iteration", None),
            sample_index=getattr(error, "sample_index", None),
        )

    @classmethod
    def from_message(
        cls,
        stage: FailureStage,
        error_type: str,
        message: str,
        seed: Optional[int] = None,
        method: str = "",
    ) -> "FailureRecord":
        """Create a failure record from an explicit error message."""
        return cls(
            stage=stage,
            error_type=error_type,
            message=message,
            seed=seed,
            method=method,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FailureRecord":
        """Create from dictionary."""
        stage = FailureStage.DATA
        if s := data.get("stage"):
            try:
                stage = FailureStage(s)
            except ValueError:
                pass

        timestamp = None
        if ts := data.get("timestamp"):
            try:
                timestamp = datetime.fromisoformat(ts)
            except ValueError:
                pass

        return cls(
            stage=stage,
            error_type=data.get("error_type", "Unknown"),
            message=data.get("message", ""),
            seed=data.get("seed"),
            method=data.get("method", ""),
            iteration=data.get("iteration"),
            sample_index=data.get("sample_index"),
            timestamp=timestamp,
        )


@dataclass(frozen=True)
class ObservationModel:
    """Homoscedastic Gaussian likelihood y ~ N(f_w(x), sigma_y^2 I)."""

    sigma_y: float = 0.1

    def __post_init__(self):
        if not self.sigma_y > 0:
            raise ValueError(f"sigma_y must be > 0, got {self.sigma_y}")

    def to_dict(self) -> Dict[str, Any]:
        return {"sigma_y": self.sigma_y}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ObservationModel":
        return cls(sigma_y=float(data["sigma_y"]))


@dataclass(frozen=True)
class PriorSpec:
    """Isotropic Gaussian prior, applied to w, z and phi alike."""

    mean: float = 0.0
    variance: float = 0.1

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"prior variance must be > 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean, "variance": self.variance}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PriorSpec":
        return cls(mean=float(data["mean"]), variance=float(data["variance"]))


def _as_vector(values: Any, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ShapeMismatchError(name, "(n,)", arr.shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MeanFieldGaussian:
    """
    Diagonal Gaussian q(v) = N(mu, diag(exp(log_std)^2)).

    The standard deviation is parametrized on the log scale so it stays
    positive under unconstrained optimization.
    """

    mu: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        mu = _as_vector(self.mu, "mu")
        log_std = _as_vector(self.log_std, "log_std")
        if mu.shape != log_std.shape:
            raise ShapeMismatchError("log_std", mu.shape, log_std.shape)
        if not np.all(np.isfinite(mu)):
            raise NonFiniteError("MeanFieldGaussian.mu")
        if np.any(np.isnan(log_std)) or np.any(log_std == np.inf):
            raise NonFiniteError("MeanFieldGaussian.log_std")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_std", log_std)

    @property
    def size(self) -> int:
        return int(self.mu.shape[0])

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    @property
    def is_variational(self) -> bool:
        return True

    @classmethod
    def matching_prior(
        cls, size: int, prior: PriorSpec, mean: Optional[np.ndarray] = None
    ) -> "MeanFieldGaussian":
        """q with the prior's std; mean defaults to the prior mean."""
        mu = np.full(size, prior.mean) if mean is None else mean
        return cls(mu=mu, log_std=np.full(size, math.log(prior.std)))

    def sample(self, eps: np.ndarray) -> np.ndarray:
        """Reparametrized draws ``mu + std * eps`` for eps of shape (..., size)."""
        eps = np.asarray(eps, dtype=float)
        if eps.shape[-1:] != (self.size,):
            raise ShapeMismatchError("eps", f"(..., {self.size})", eps.shape)
        return self.mu + self.std * eps

    def to_dict(self) -> Dict[str, Any]:
        return {"mu": self.mu.tolist(), "log_std": self.log_std.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MeanFieldGaussian":
        return cls(mu=np.asarray(data["mu"]), log_std=np.asarray(data["log_std"]))


@dataclass(frozen=True, eq=False)
class PointMass:
    """Degenerate q at fixed values; contributes no KL and no noise."""

    values: np.ndarray

    def __post_init__(self):
        values = _as_vector(self.values, "values")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("PointMass.values")
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    @property
    def mu(self) -> np.ndarray:
        return self.values

    @property
    def is_variational(self) -> bool:
        return False

    def sample(self, eps: Optional[np.ndarray] = None) -> np.ndarray:
        return self.values

    def to_dict(self) -> Dict[str, Any]:
        return {"values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PointMass":
        return cls(values=np.asarray(data["values"]))


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """
    Weight snapshots of one target architecture.

    Attributes:
        matrix: (R, D_w) array, one snapshot per row.
        valid_rmse: (R,) validation RMSE of each snapshot.
        arch_fingerprint: Fingerprint of the architecture the rows belong to.
        harvest_index: Position of each row in the original harvest order.
    """

    matrix: np.ndarray
    valid_rmse: np.ndarray
    arch_fingerprint: str
    harvest_index: Optional[np.ndarray] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2:
            raise ShapeMismatchError("snapshot matrix", "(R, D_w)", matrix.shape)
        rmse = np.array(self.valid_rmse, dtype=float).reshape(-1)
        if rmse.shape[0] != matrix.shape[0]:
            raise ShapeMismatchError("valid_rmse", (matrix.shape[0],), rmse.shape)
        if np.any(rmse < 0):
            raise ValueError("validation RMSE must be non-negative")
        if not np.all(np.isfinite(matrix)):
            raise NonFiniteError("SnapshotSet.matrix", stage="fge")
        if self.harvest_index is None:
            index = np.arange(matrix.shape[0])
        else:
            index = np.array(self.harvest_index, dtype=int).reshape(-1)
            if index.shape[0] != matrix.shape[0]:
                raise ShapeMismatchError("harvest_index", (matrix.shape[0],), index.shape)
        for arr in (matrix, rmse, index):
            arr.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "valid_rmse", rmse)
        object.__setattr__(self, "harvest_index", index)

    def __len__(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def weight_dim(self) -> int:
        return int(self.matrix.shape[1])

    def check_fingerprint(self, fingerprint: str) -> None:
        if fingerprint != self.arch_fingerprint:
            raise FingerprintMismatchError(fingerprint, self.arch_fingerprint, "snapshots")

    def subset(self, rows: Sequence[int]) -> "SnapshotSet":
        rows = np.asarray(rows, dtype=int)
        return SnapshotSet(
            matrix=self.matrix[rows],
            valid_rmse=self.valid_rmse[rows],
            arch_fingerprint=self.arch_fingerprint,
            harvest_index=self.harvest_index[rows],
        )

    @classmethod
    def concatenate(cls, parts: Sequence["SnapshotSet"]) -> "SnapshotSet":
        """Stack harvests of the same architecture, renumbering harvest order."""
        if not parts:
            raise ValueError("nothing to concatenate")
        fingerprint = parts[0].arch_fingerprint
        for part in parts[1:]:
            part.check_fingerprint(fingerprint)
        matrix = np.concatenate([p.matrix for p in parts], axis=0)
        rmse = np.concatenate([p.valid_rmse for p in parts])
        return cls(matrix=matrix, valid_rmse=rmse, arch_fingerprint=fingerprint)


@dataclass
class TrainingTrace:
    """
    Optimization history of a VI run.

    Attributes:
        elbo: (iteration, minibatch ELBO) per optimizer step.
        checks: (iteration, validation marginal log-likelihood) per check.
        best_iteration: Iteration of the returned (best-validation) iterate.
        stopped_early: Whether patience ran out before max_iterations.
    """

    elbo: List[Tuple[int, float]] = field(default_factory=list)
    checks: List[Tuple[int, float]] = field(default_factory=list)
    best_iteration: int = 0
    stopped_early: bool = False

    @property
    def elbo_values(self) -> List[float]:
        return [value for _, value in self.elbo]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "elbo": [[i, v] for i, v in self.elbo],
            "checks": [[i, v] for i, v in self.checks],
            "best_iteration": self.best_iteration,
            "stopped_early": self.stopped_early,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainingTrace":
        return cls(
            elbo=[(int(i), float(v)) for i, v in data.get("elbo", [])],
            checks=[(int(i), float(v)) for i, v in data.get("checks", [])],
            best_iteration=int(data.get("best_iteration", 0)),
            stopped_early=bool(data.get("stopped_early", False)),
        )
