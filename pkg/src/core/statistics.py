"""
Statistical utilities.

- logmeanexp: numerically stable log of a mean of exponentials
- summarize_over_seeds: mean and spread of a metric across seeds
- pca_project: principal-component scores of weight samples
- two_means: 2-cluster split of projected weights
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from .errors import ShapeMismatchError


def logmeanexp(values: Any, axis: int = 0) -> Any:
    """log(mean(exp(values))) along ``axis`` without overflow."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if n == 0:
        raise ValueError("logmeanexp of an empty axis")
    return logsumexp(values, axis=axis) - math.log(n)


@dataclass(frozen=True)
class SeedSummary:
    """Mean and sample standard deviation of a metric over seeds."""

    mean: float
    std: float
    n: int
    label: str = "std over seeds"

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean, "std": self.std, "n": self.n, "label": self.label}


def summarize_over_seeds(values: Sequence[float]) -> SeedSummary:
    """Spread across independent seeds (ddof=1; 0 for a single seed)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("no values to summarize")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return SeedSummary(mean=float(arr.mean()), std=std, n=int(arr.size))


@dataclass(frozen=True, eq=False)
class PcaProjection:
    """Scores of samples on the leading principal components."""

    scores: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray


def pca_project(weights: np.ndarray, k: int = 2) -> PcaProjection:
    """Project rows of ``weights`` (R, D) onto their top-``k`` principal axes."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 2:
        raise ShapeMismatchError("weights", "(R, D)", weights.shape)
    if not 1 <= k <= min(weights.shape):
        raise ValueError(f"k must be in [1, {min(weights.shape)}], got {k}")

    mean = weights.mean(axis=0)
    centered = weights - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variance = singular**2
    total = variance.sum()
    ratio = variance[:k] / total if total > 0 else np.zeros(k)
    return PcaProjection(
        scores=centered @ vt[:k].T,
        components=vt[:k],
        explained_variance_ratio=ratio,
        mean=mean,
    )


@dataclass(frozen=True, eq=False)
class ClusterSplit:
    """Result of a 2-means split."""

    labels: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray
    separation: float

    @property
    def n_clusters(self) -> int:
        """Number of non-empty clusters."""
        return int(np.count_nonzero(self.sizes))


def two_means(points: np.ndarray, seed: int = 0) -> ClusterSplit:
    """
    Split points into two clusters with k-means (k-means++ start).

    ``separation`` is the centroid distance divided by the pooled RMS
    distance of points to their own centroid; 0 when a cluster is empty.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] < 2:
        raise ValueError("need at least two points to split")

    centroids, labels = kmeans2(points, 2, minit="++", seed=seed)
    sizes = np.bincount(labels, minlength=2)
    if np.count_nonzero(sizes) < 2:
        return ClusterSplit(labels, centroids, sizes, 0.0)

    spread = math.sqrt(
        float(np.mean(np.sum((points - centroids[labels]) ** 2, axis=1)))
    )
    gap = float(np.linalg.norm(centroids[0] - centroids[1]))
    separation = gap / spread if spread > 0 else math.inf
    return ClusterSplit(labels, centroids, sizes, separation)
