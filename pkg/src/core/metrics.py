"""
Evaluation of posterior approximations.

Every model exposes the ``WeightSampler`` protocol (a target architecture
plus a way to draw weight samples). Metrics are computed from those draws:
- marginal_test_ll: mean over points of log (1/S) sum_s N(y | f_s(x), sigma_y^2)
- predictive_rmse: RMSE of the predictive mean
- predictive_bands: mean, empirical quantiles and total std on an input grid
- mode_coverage: how many data clusters at least one sample fits
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Protocol, Sequence

import numpy as np
from scipy.stats import norm

from ..utils.logging import get_logger
from .errors import NonFiniteError, ShapeMismatchError
from .models import Method, ObservationModel, SnapshotSet
from .network import Architecture, forward, log_normal
from .statistics import logmeanexp

logger = get_logger(__name__)


class WeightSampler(Protocol):
    """Anything that can produce target-network weight samples."""

    method: Method
    target_arch: Architecture

    def sample_weights(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Return (n, D_w) weight samples."""
        ...


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    """Snapshot ensemble treated as an empirical posterior."""

    snapshots: SnapshotSet
    target_arch: Architecture
    method: Method = Method.FGE

    def __post_init__(self):
        self.snapshots.check_fingerprint(self.target_arch.fingerprint)

    def sample_weights(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Cycle through the snapshots in order (rng unused)."""
        rows = np.arange(n) % len(self.snapshots)
        return self.snapshots.matrix[rows]


def per_sample_loglik(
    arch: Architecture,
    weights: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    sigma_y: float,
) -> np.ndarray:
    """(S, N) matrix of log N(y_n | f_{w_s}(x_n), sigma_y^2), summed over outputs."""
    weights = np.atleast_2d(weights)
    pred = forward(arch, weights, x)
    return np.sum(log_normal(y, pred, sigma_y), axis=-1)


def marginal_log_likelihood(loglik: np.ndarray, stage: str = "eval") -> float:
    """
    Mean over points of logmeanexp over samples.

    Raises:
        NonFiniteError: Naming the first sample with a non-finite entry.
    """
    loglik = np.asarray(loglik, dtype=float)
    if loglik.ndim != 2:
        raise ShapeMismatchError("loglik", "(S, N)", loglik.shape)
    bad = np.argwhere(~np.isfinite(loglik))
    if bad.size:
        sample, point = bad[0]
        raise NonFiniteError(
            "marginal log-likelihood",
            stage=stage,
            sample_index=int(sample),
            detail=f"point={int(point)}",
        )
    return float(np.mean(logmeanexp(loglik, axis=0)))


def marginal_test_ll(
    model: WeightSampler,
    x: np.ndarray,
    y: np.ndarray,
    obs: ObservationModel,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Marginal predictive log-likelihood of (x, y) under ``model``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    weights = model.sample_weights(rng, n_samples)
    return marginal_log_likelihood(
        per_sample_loglik(model.target_arch, weights, x, y, obs.sigma_y)
    )


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Root-mean-square error over all entries."""
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape:
        raise ShapeMismatchError("predictions", targets.shape, predictions.shape)
    if predictions.size == 0:
        raise ValueError("rmse of empty arrays")
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def predictive_samples(
    model: WeightSampler, x: np.ndarray, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """(S, N, D_out) function values at ``x``."""
    return forward(model.target_arch, model.sample_weights(rng, n_samples), x)


def predictive_rmse(
    model: WeightSampler,
    x: np.ndarray,
    y: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """RMSE of the predictive mean against ``y``."""
    mean = predictive_samples(model, x, n_samples, rng).mean(axis=0)
    return rmse(mean, y)


@dataclass(frozen=True, eq=False)
class Bands:
    """
    Predictive summaries on a 1-D input grid.

    ``f_quantiles`` are empirical quantiles of the sampled functions;
    ``y_quantiles`` add observation noise through a Gaussian with the total
    standard deviation sqrt(Var_s f + sigma_y^2).
    """

    x: np.ndarray
    mean: np.ndarray
    levels: np.ndarray
    f_quantiles: np.ndarray
    total_std: np.ndarray
    y_quantiles: np.ndarray

    def to_columns(self) -> Dict[str, np.ndarray]:
        """Flat columns for CSV export; the outermost levels become q_low/q_high."""
        columns: Dict[str, np.ndarray] = {
            "x": self.x,
            "mean": self.mean,
            "q_low": self.f_quantiles[0],
            "q_high": self.f_quantiles[-1],
            "total_std": self.total_std,
            "y_low": self.y_quantiles[0],
            "y_high": self.y_quantiles[-1],
        }
        for level, values in zip(self.levels, self.f_quantiles):
            columns[f"q_{level:g}"] = values
        return columns


def bands_from_samples(
    x_grid: np.ndarray,
    samples: np.ndarray,
    quantiles: Sequence[float],
    obs: ObservationModel,
) -> Bands:
    """Summarize (S, G) function samples on the grid."""
    samples = np.asarray(samples, dtype=float)
    levels = np.asarray(sorted(quantiles), dtype=float)
    if levels.size == 0:
        raise ValueError("need at least one quantile level")
    mean = samples.mean(axis=0)
    f_quantiles = np.quantile(samples, levels, axis=0, method="midpoint")
    total_std = np.sqrt(samples.var(axis=0) + obs.sigma_y**2)
    y_quantiles = mean[None, :] + norm.ppf(levels)[:, None] * total_std[None, :]
    return Bands(
        x=np.asarray(x_grid, dtype=float).reshape(-1),
        mean=mean,
        levels=levels,
        f_quantiles=f_quantiles,
        total_std=total_std,
        y_quantiles=y_quantiles,
    )


def predictive_bands(
    model: WeightSampler,
    x_grid: np.ndarray,
    n_samples: int,
    quantiles: Sequence[float],
    obs: ObservationModel,
    rng: np.random.Generator,
) -> Bands:
    """Predictive bands of a 1-D-input, 1-D-output model."""
    arch = model.target_arch
    if arch.input_dim != 1 or arch.output_dim != 1:
        raise ShapeMismatchError("bands model", "1 input, 1 output", arch.layer_sizes)
    x_grid = np.asarray(x_grid, dtype=float).reshape(-1, 1)
    samples = predictive_samples(model, x_grid, n_samples, rng)[..., 0]
    return bands_from_samples(x_grid, samples, quantiles, obs)


def region_mean_std(bands: Bands, low: float, high: float) -> float:
    """Average total std over grid points with low <= x <= high."""
    mask = (bands.x >= low) & (bands.x <= high)
    if not np.any(mask):
        raise ValueError(f"no grid points in [{low}, {high}]")
    return float(bands.total_std[mask].mean())


def mode_coverage(
    predictions: np.ndarray,
    y: np.ndarray,
    modes: Sequence[Any],
    sigma_y: float,
    threshold_sigmas: float = 3.0,
) -> int:
    """
    Count modes fit by at least one sample.

    A sample fits a mode when its RMSE over the mode's points is at most
    ``threshold_sigmas * sigma_y``.

    Args:
        predictions: (S, N) or (S, N, 1) sampled predictions at the data points.
        y: (N,) or (N, 1) targets.
        modes: Objects with a ``point_indices`` array.
    """
    predictions = np.asarray(predictions, dtype=float)
    if predictions.size == 0 or predictions.shape[0] == 0:
        return 0
    if predictions.ndim == 3:
        predictions = predictions[..., 0]
    y = np.asarray(y, dtype=float).reshape(-1)
    tolerance = threshold_sigmas * sigma_y

    covered = 0
    for mode in modes:
        idx = np.asarray(mode.point_indices, dtype=int)
        errors = np.sqrt(np.mean((predictions[:, idx] - y[idx]) ** 2, axis=1))
        if np.any(errors <= tolerance):
            covered += 1
    return covered


@dataclass
class EvaluationReport:
    """Test metrics of one model on one split."""

    method: str
    test_ll: float
    test_rmse: float
    n_samples: int
    n_points: int
    valid_ll: Optional[float] = None
    mode_coverage: Optional[int] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "method": self.method,
            "test_ll": self.test_ll,
            "test_rmse": self.test_rmse,
            "n_samples": self.n_samples,
            "n_points": self.n_points,
        }
        if self.valid_ll is not None:
            data["valid_ll"] = self.valid_ll
        if self.mode_coverage is not None:
            data["mode_coverage"] = self.mode_coverage
        if self.extras:
            data.update(self.extras)
        return data


def evaluate(
    model: WeightSampler,
    x: np.ndarray,
    y: np.ndarray,
    obs: ObservationModel,
    n_samples: int,
    rng: np.random.Generator,
    modes: Optional[Sequence[Any]] = None,
    threshold_sigmas: float = 3.0,
) -> tuple[EvaluationReport, np.ndarray]:
    """
    Test LL, RMSE and (optionally) mode coverage from one set of draws.

    Returns the report and the (S, N) per-sample log-likelihood matrix.
    """
    weights = model.sample_weights(rng, n_samples)
    arch = model.target_arch
    preds = forward(arch, weights, x)
    loglik = np.sum(log_normal(y, preds, obs.sigma_y), axis=-1)

    report = EvaluationReport(
        method=str(model.method),
        test_ll=marginal_log_likelihood(loglik),
        test_rmse=rmse(preds.mean(axis=0), y),
        n_samples=n_samples,
        n_points=int(np.shape(x)[0]),
    )
    if modes:
        report.mode_coverage = mode_coverage(
            preds, y, modes, obs.sigma_y, threshold_sigmas
        )
    logger.info(
        f"Evaluated {report.method}: test LL {report.test_ll:.4f}, "
        f"RMSE {report.test_rmse:.4f} ({n_samples} samples)"
    )
    return report, loglik


def grid_points(low: float, high: float, n: int) -> np.ndarray:
    """Evenly spaced 1-D grid as an (n, 1) column."""
    return np.linspace(low, high, n)[:, None]


def padded_range(x: np.ndarray, pad: float = 0.25) -> tuple[float, float]:
    """Data range widened by ``pad`` times its width on each side."""
    low, high = float(np.min(x)), float(np.max(x))
    width = high - low if high > low else 1.0
    return low - pad * width, high + pad * width


__all__: List[str] = [
    "Bands",
    "EnsembleModel",
    "EvaluationReport",
    "WeightSampler",
    "bands_from_samples",
    "evaluate",
    "grid_points",
    "marginal_log_likelihood",
    "marginal_test_ll",
    "mode_coverage",
    "padded_range",
    "per_sample_loglik",
    "predictive_bands",
    "predictive_rmse",
    "predictive_samples",
    "region_mean_std",
    "rmse",
]

