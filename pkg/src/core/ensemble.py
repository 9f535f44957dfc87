"""
Stage 1: snapshot harvesting with a cyclic learning rate.

A MAP fit (Adam) is followed by R cycles of minibatch SGD whose learning
rate decays linearly from ``lr_max`` to ``lr_min`` inside each cycle; the
weights at the end of every cycle are kept as a snapshot. Snapshots are
scored by validation RMSE and the best ``keep_top_k`` are retained.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterator, List, Optional, Sequence

import autograd.numpy as anp
import numpy as np
from autograd import value_and_grad

from ..data.dataset import Dataset
from ..utils.config import FgeConfig
from ..utils.logging import get_logger
from ..utils.seeding import split_streams
from .errors import NonFiniteError
from .models import ObservationModel, PriorSpec, SnapshotSet
from .network import (
    Architecture,
    WeightVector,
    forward,
    init_weights,
    log_likelihood,
    log_normal,
)
from .optim import make_optimizer

logger = get_logger(__name__)


def cyclic_lr(t: int, cycle_length: int, lr_max: float, lr_min: float) -> float:
    """
    Learning rate at step ``t`` of a cycle of ``cycle_length`` steps.

    Decreases linearly from exactly ``lr_max`` (t = 0) to exactly
    ``lr_min`` (t = T - 1).
    """
    if cycle_length < 2:
        raise ValueError(f"cycle length must be >= 2, got {cycle_length}")
    if not 0 <= t < cycle_length:
        raise ValueError(f"t must be in [0, {cycle_length}), got {t}")
    if not lr_max > lr_min > 0:
        raise ValueError("need lr_max > lr_min > 0")
    if t == cycle_length - 1:
        return lr_min
    return lr_max - (lr_max - lr_min) * t / (cycle_length - 1)


def minibatches(
    n: int, batch_size: int, rng: np.random.Generator
) -> Iterator[np.ndarray]:
    """Endless stream of index batches, reshuffled every epoch."""
    batch_size = min(batch_size, n)
    while True:
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield perm[start : start + batch_size]


def _neg_log_joint(
    weights, arch, x, y, sigma_y, prior_mean, prior_std, scale, unit=1.0
):
    """-unit * (scale * log p(y_B | x_B, w) + log p(w)) for a minibatch B."""
    ll = log_likelihood(arch, weights, x, y, sigma_y)
    lp = anp.sum(log_normal(weights, prior_mean, prior_std))
    return -unit * (scale * ll + lp)


_neg_log_joint_and_grad = value_and_grad(_neg_log_joint)


def _descend(
    arch: Architecture,
    weights: np.ndarray,
    train: Dataset,
    obs: ObservationModel,
    prior: PriorSpec,
    optimizer_name: str,
    base_lr: float,
    n_steps: int,
    batch_size: int,
    rng: np.random.Generator,
    stage: str,
    schedule=None,
    step_offset: int = 0,
    per_example: bool = False,
) -> np.ndarray:
    """
    Minibatch descent on the negative log joint.

    With ``per_example`` the objective is multiplied by sigma_y^2 / N, i.e.
    half the mean squared error plus the prior term in the same units. The
    minimizer is unchanged; curvature no longer grows with N / sigma_y^2.
    """
    optimizer = make_optimizer(optimizer_name, base_lr)
    batches = minibatches(train.n, batch_size, rng)
    unit = obs.sigma_y**2 / train.n if per_example else 1.0
    for t in range(n_steps):
        idx = next(batches)
        scale = train.n / len(idx)
        value, grad = _neg_log_joint_and_grad(
            weights,
            arch,
            train.x[idx],
            train.y[idx],
            obs.sigma_y,
            prior.mean,
            prior.std,
            scale,
            unit,
        )
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NonFiniteError(
                "negative log joint", stage=stage, iteration=step_offset + t
            )
        lr = schedule(t) if schedule is not None else None
        weights = optimizer.step(weights, grad, lr=lr)
    return weights


def train_map(
    arch: Architecture,
    train: Dataset,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: FgeConfig,
    init: Optional[np.ndarray] = None,
) -> WeightVector:
    """
    Maximize log p(y | x, w) + log p(w) with minibatch Adam.

    Zero iterations return the seeded initialization unchanged.
    """
    init_rng, batch_rng = split_streams(cfg.seed, 2)
    weights = init_weights(arch, init_rng, cfg.init_std) if init is None else init
    logger.info(
        f"MAP fit: {arch.num_params} weights, {cfg.map_iterations} iterations "
        f"({cfg.map_optimizer}, lr={cfg.map_lr})"
    )
    weights = _descend(
        arch,
        np.asarray(weights, dtype=float),
        train,
        obs,
        prior,
        cfg.map_optimizer,
        cfg.map_lr,
        cfg.map_iterations,
        cfg.batch_size,
        batch_rng,
        stage="fge",
    )
    return WeightVector.for_arch(arch, weights)


def snapshot_rmse(
    arch: Architecture, matrix: np.ndarray, valid: Dataset
) -> np.ndarray:
    """Validation RMSE of every snapshot row, computed in one batch."""
    preds = forward(arch, matrix, valid.x)
    return np.sqrt(np.mean((preds - valid.y) ** 2, axis=(1, 2)))


def cycle_length(cfg: FgeConfig, n_train: int) -> int:
    """Optimizer steps per cycle: cycle_epochs epochs of minibatches (>= 2)."""
    per_epoch = math.ceil(n_train / min(cfg.batch_size, n_train))
    return max(2, cfg.cycle_epochs * per_epoch)


def collect_fge_snapshots(
    arch: Architecture,
    start: WeightVector,
    train: Dataset,
    valid: Dataset,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: FgeConfig,
    n_snapshots: Optional[int] = None,
) -> SnapshotSet:
    """
    Run R learning-rate cycles from ``start`` and keep the end of each.

    The cycles descend the per-example objective (see ``_descend``) so that
    ``lr_max`` means the same thing for any N and sigma_y.

    Returns all R snapshots in harvest order with their validation RMSE.
    """
    weights = np.array(start.check(arch), dtype=float)
    n_cycles = cfg.snapshots if n_snapshots is None else n_snapshots
    length = cycle_length(cfg, train.n)
    _, batch_rng = split_streams(cfg.seed + 1, 2)

    def schedule(t: int) -> float:
        return cyclic_lr(t, length, cfg.lr_max, cfg.lr_min)

    snapshots = np.empty((n_cycles, arch.num_params))
    for r in range(n_cycles):
        weights = _descend(
            arch,
            weights,
            train,
            obs,
            prior,
            cfg.cycle_optimizer,
            cfg.lr_max,
            length,
            cfg.batch_size,
            batch_rng,
            stage="fge",
            schedule=schedule,
            step_offset=r * length,
            per_example=True,
        )
        snapshots[r] = weights
        if (r + 1) % max(1, n_cycles // 10) == 0:
            logger.debug(f"FGE cycle {r + 1}/{n_cycles}")

    rmse = snapshot_rmse(arch, snapshots, valid)
    logger.info(
        f"Harvested {n_cycles} snapshots (cycle length {length}); "
        f"best valid RMSE {rmse.min():.4f}"
    )
    return SnapshotSet(
        matrix=snapshots, valid_rmse=rmse, arch_fingerprint=arch.fingerprint
    )


def filter_top_k(snapshots: SnapshotSet, k: int) -> SnapshotSet:
    """
    Keep the ``k`` snapshots with the smallest validation RMSE.

    Ties are broken by earlier harvest index.

    Raises:
        ValueError: If ``k`` exceeds the number of snapshots or is < 1.
    """
    if not 1 <= k <= len(snapshots):
        raise ValueError(f"k must be in [1, {len(snapshots)}], got {k}")
    order = np.lexsort((snapshots.harvest_index, snapshots.valid_rmse))
    return snapshots.subset(order[:k])


def collect_subset_snapshots(
    arch: Architecture,
    subsets: Sequence[Dataset],
    valid: Dataset,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: FgeConfig,
) -> SnapshotSet:
    """
    Harvest around separate MAP fits of several data subsets.

    Used for multimodal toys: each subset (e.g. three of four clusters)
    gets its own MAP start and an equal share of the R cycles.
    """
    if not subsets:
        raise ValueError("need at least one subset")
    shares = [cfg.snapshots // len(subsets)] * len(subsets)
    for i in range(cfg.snapshots % len(subsets)):
        shares[i] += 1

    parts: List[SnapshotSet] = []
    for i, (subset, share) in enumerate(zip(subsets, shares)):
        if share == 0:
            continue
        sub_cfg = dataclasses.replace(cfg, seed=cfg.seed + 1000 * (i + 1))
        start = train_map(arch, subset, obs, prior, sub_cfg)
        parts.append(
            collect_fge_snapshots(arch, start, subset, valid, obs, prior, sub_cfg, share)
        )
        logger.info(f"Subset {i + 1}/{len(subsets)} ({subset.name}): {share} snapshots")
    return SnapshotSet.concatenate(parts)


def run_fge(
    arch: Architecture,
    train: Dataset,
    valid: Dataset,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: FgeConfig,
    subsets: Optional[Sequence[Dataset]] = None,
) -> tuple[SnapshotSet, SnapshotSet]:
    """MAP + harvest + top-k; returns (all snapshots, kept snapshots)."""
    arch.require_hidden()
    if subsets:
        harvested = collect_subset_snapshots(arch, subsets, valid, obs, prior, cfg)
    else:
        start = train_map(arch, train, obs, prior, cfg)
        harvested = collect_fge_snapshots(arch, start, train, valid, obs, prior, cfg)
    kept = filter_top_k(harvested, min(cfg.keep_top_k, len(harvested)))
    logger.info(f"Kept {len(kept)}/{len(harvested)} snapshots")
    return harvested, kept
