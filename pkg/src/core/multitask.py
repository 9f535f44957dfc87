"""
Multitask Proj-BNN: one latent posterior per task, one shared decoder.

Each task m has its own q(z_m); all tasks decode through the same q(phi).
The ELBO sums the per-task data terms and latent KLs and subtracts the
decoder KL once. With a single task this is exactly the one-stage
Proj-BNN objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import autograd.numpy as anp
import numpy as np
from autograd import value_and_grad
from scipy.stats import norm

from ..data.dataset import Dataset
from ..data.generators import TaskSet
from ..utils.config import MetaConfig, VarInferenceConfig
from ..utils.logging import get_logger
from ..utils.seeding import split_streams
from .ensemble import minibatches
from .errors import ConfigError, NonFiniteError, ShapeMismatchError
from .metrics import marginal_test_ll, predictive_rmse
from .models import MeanFieldGaussian, Method, ObservationModel, PriorSpec, TrainingTrace
from .network import Architecture, decode_batch, forward, log_likelihood
from .vi import (
    N_STREAMS,
    VariationalModel,
    _data_term,
    _init_mean,
    _kl_diag,
    fit_variational,
    random_autoencoder,
    train_bbb,
)

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class TaskSplit:
    """Train/valid/test parts of one task."""

    train: Dataset
    valid: Dataset
    test: Dataset


def split_tasks(tasks: TaskSet, holdout_fraction: float, seed: int) -> List[TaskSplit]:
    """
    Hold out ``holdout_fraction`` of every task for validation and the same
    share for testing (at least one point each).
    """
    rng = np.random.default_rng(seed)
    splits = []
    for task in tasks.tasks:
        if task.n < 3:
            raise ValueError(f"task {task.name} has fewer than 3 points")
        n_hold = max(1, int(math.floor(holdout_fraction * task.n)))
        n_hold = min(n_hold, (task.n - 1) // 2)
        perm = rng.permutation(task.n)
        splits.append(
            TaskSplit(
                train=task.subset(np.sort(perm[2 * n_hold :]), f"{task.name}:train"),
                valid=task.subset(np.sort(perm[:n_hold]), f"{task.name}:valid"),
                test=task.subset(np.sort(perm[n_hold : 2 * n_hold]), f"{task.name}:test"),
            )
        )
    return splits


class MetaObjective:
    """
    Multitask ELBO.

    Flat layout: ``[mu_z1, log_std_z1, ..., mu_zM, log_std_zM, mu_phi, log_std_phi]``.
    """

    def __init__(
        self,
        decoder_arch: Architecture,
        target_arch: Architecture,
        obs: ObservationModel,
        prior: PriorSpec,
        n_tasks: int,
    ):
        if n_tasks < 1:
            raise ValueError("need at least one task")
        if decoder_arch.output_dim != target_arch.num_params:
            raise ShapeMismatchError(
                "decoder output", target_arch.num_params, decoder_arch.output_dim
            )
        self.decoder_arch = decoder_arch
        self.target_arch = target_arch
        self.obs = obs
        self.prior = prior
        self.n_tasks = n_tasks
        self.z_dim = decoder_arch.input_dim
        self.phi_dim = decoder_arch.num_params
        self.phi_offset = 2 * self.z_dim * n_tasks

    def pack(self, q_zs: Sequence[MeanFieldGaussian], q_phi: MeanFieldGaussian) -> np.ndarray:
        parts = []
        for q_z in q_zs:
            parts += [q_z.mu, q_z.log_std]
        return np.concatenate(parts + [q_phi.mu, q_phi.log_std])

    def unpack(self, flat: np.ndarray) -> Tuple[List[MeanFieldGaussian], MeanFieldGaussian]:
        d = self.z_dim
        q_zs = [
            MeanFieldGaussian(
                mu=flat[2 * d * m : 2 * d * m + d], log_std=flat[2 * d * m + d : 2 * d * (m + 1)]
            )
            for m in range(self.n_tasks)
        ]
        start, p = self.phi_offset, self.phi_dim
        q_phi = MeanFieldGaussian(
            mu=flat[start : start + p], log_std=flat[start + p : start + 2 * p]
        )
        return q_zs, q_phi

    def draw_eps(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, ...]:
        """One z-noise block per task, then the shared phi noise."""
        eps_z = [rng.standard_normal((n, self.z_dim)) for _ in range(self.n_tasks)]
        return (*eps_z, rng.standard_normal((n, self.phi_dim)))

    def _phi(self, flat, eps_phi):
        start, p = self.phi_offset, self.phi_dim
        return flat[start : start + p] + anp.exp(flat[start + p : start + 2 * p]) * eps_phi

    def _z(self, flat, m, eps_z):
        d, offset = self.z_dim, 2 * self.z_dim * m
        return flat[offset : offset + d] + anp.exp(flat[offset + d : offset + 2 * d]) * eps_z

    def elbo(self, flat, batches, *eps):
        eps_z, eps_phi = eps[:-1], eps[-1]
        phi = self._phi(flat, eps_phi)
        d = self.z_dim
        total = 0.0
        for m, (x, y, n_total) in enumerate(batches):
            w = decode_batch(self.decoder_arch, phi, self._z(flat, m, eps_z[m]))
            offset = 2 * d * m
            total = total + (
                _data_term(self.target_arch, w, x, y, n_total, self.obs.sigma_y)
                - _kl_diag(
                    flat[offset : offset + d],
                    flat[offset + d : offset + 2 * d],
                    self.prior.mean,
                    self.prior.std,
                )
            )
        start, p = self.phi_offset, self.phi_dim
        return total - _kl_diag(
            flat[start : start + p],
            flat[start + p : start + 2 * p],
            self.prior.mean,
            self.prior.std,
        )

    def per_sample_loglik(self, flat, batches, *eps) -> np.ndarray:
        """(S,) data log-likelihood summed over all task batches."""
        flat = np.asarray(flat)
        phi = self._phi(flat, eps[-1])
        total = 0.0
        for m, (x, y, _) in enumerate(batches):
            w = decode_batch(self.decoder_arch, phi, self._z(flat, m, eps[m]))
            total = total + log_likelihood(self.target_arch, w, x, y, self.obs.sigma_y)
        return np.asarray(total)

    def to_model(self, flat: np.ndarray, trace: Optional[TrainingTrace] = None) -> "MetaModel":
        q_zs, q_phi = self.unpack(flat)
        return MetaModel(
            q_zs=q_zs,
            q_phi=q_phi,
            decoder_arch=self.decoder_arch,
            target_arch=self.target_arch,
            trace=trace or TrainingTrace(),
        )


@dataclass(eq=False)
class MetaModel:
    """Per-task latent posteriors sharing one decoder posterior."""

    q_zs: List[MeanFieldGaussian]
    q_phi: MeanFieldGaussian
    decoder_arch: Architecture
    target_arch: Architecture
    trace: TrainingTrace = field(default_factory=TrainingTrace)
    method: Method = Method.META

    @property
    def n_tasks(self) -> int:
        return len(self.q_zs)

    def task_model(self, m: int) -> VariationalModel:
        """Task ``m`` viewed as an ordinary projected posterior."""
        return VariationalModel(
            method=Method.META,
            target_arch=self.target_arch,
            q_z=self.q_zs[m],
            q_phi=self.q_phi,
            decoder_arch=self.decoder_arch,
        )


def elbo_meta(
    q_zs: Sequence[MeanFieldGaussian],
    q_phi: MeanFieldGaussian,
    decoder_arch: Architecture,
    target_arch: Architecture,
    task_batches: Sequence[Tuple[np.ndarray, np.ndarray, int]],
    obs: ObservationModel,
    prior: PriorSpec,
    eps_z: Sequence[np.ndarray],
    eps_phi: np.ndarray,
) -> float:
    """
    Multitask ELBO estimate.

    ``task_batches`` holds ``(x_batch, y_batch, n_total)`` per task; an empty
    batch contributes no data term.
    """
    if not len(q_zs) == len(task_batches) == len(eps_z):
        raise ShapeMismatchError(
            "tasks", len(q_zs), f"{len(task_batches)} batches / {len(eps_z)} eps"
        )
    objective = MetaObjective(decoder_arch, target_arch, obs, prior, len(q_zs))
    flat = objective.pack(q_zs, q_phi)
    return float(objective.elbo(flat, list(task_batches), *eps_z, eps_phi))


def train_meta(
    splits: Sequence[TaskSplit],
    target_arch: Architecture,
    obs: ObservationModel,
    prior: PriorSpec,
    meta_cfg: MetaConfig,
    cfg: VarInferenceConfig,
) -> MetaModel:
    """
    Fit per-task q(z_m) and a shared q(phi) from a random decoder start.

    Validation metric: sum over tasks of the marginal log-likelihood of
    each task's validation points.
    """
    init_rng, batch_rng, eps_rng, eval_rng, _ = split_streams(cfg.seed, N_STREAMS)
    ae = random_autoencoder(
        target_arch,
        meta_cfg.latent_dim,
        meta_cfg.decoder_hidden,
        meta_cfg.decoder_activation,
        prior,
        cfg.seed,
    )
    objective = MetaObjective(ae.decoder_arch, target_arch, obs, prior, len(splits))

    q_zs = [
        MeanFieldGaussian.matching_prior(
            objective.z_dim, prior, _init_mean(objective.z_dim, prior, cfg, init_rng)
        )
        for _ in splits
    ]
    q_phi = MeanFieldGaussian(
        mu=ae.phi.values,
        log_std=init_rng.normal(
            cfg.phi_logstd_init_mean, cfg.phi_logstd_init_std, objective.phi_dim
        ),
    )

    batch_streams = [minibatches(s.train.n, cfg.batch_size, batch_rng) for s in splits]
    elbo_and_grad = value_and_grad(objective.elbo)

    def step(params: np.ndarray, it: int):
        batches = []
        for split, stream in zip(splits, batch_streams):
            idx = next(stream)
            batches.append((split.train.x[idx], split.train.y[idx], split.train.n))
        eps = objective.draw_eps(eps_rng, cfg.mc_samples)
        value, grad = elbo_and_grad(params, batches, *eps)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            bad = np.flatnonzero(~np.isfinite(objective.per_sample_loglik(params, batches, *eps)))
            raise NonFiniteError(
                "multitask ELBO",
                stage="meta",
                iteration=it,
                sample_index=int(bad[0]) if bad.size else None,
            )
        return value, grad

    def validate(params: np.ndarray) -> float:
        model = objective.to_model(params)
        total = 0.0
        for m, split in enumerate(splits):
            total = total + marginal_test_ll(
                model.task_model(m), split.valid.x, split.valid.y, obs,
                cfg.eval_samples, eval_rng,
            )
        return total

    logger.info(
        f"Multitask training: {len(splits)} tasks, D_z={objective.z_dim}, "
        f"D_phi={objective.phi_dim}"
    )
    result = fit_variational(objective.pack(q_zs, q_phi), step, validate, cfg, label="meta")
    return objective.to_model(result.params, result.trace)


def train_shared_bbb(
    splits: Sequence[TaskSplit],
    target_arch: Architecture,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: VarInferenceConfig,
) -> VariationalModel:
    """Single weight-space posterior fit to all tasks pooled (baseline)."""

    def pool(parts: Sequence[Dataset], name: str) -> Dataset:
        return Dataset(
            x=np.concatenate([p.x for p in parts]),
            y=np.concatenate([p.y for p in parts]),
            name=name,
        )

    train = pool([s.train for s in splits], "tasks:train")
    valid = pool([s.valid for s in splits], "tasks:valid")
    return train_bbb(train, valid, target_arch, obs, prior, cfg)


def task_rmse(
    models: Sequence[VariationalModel],
    parts: Sequence[Dataset],
    n_samples: int,
    rng: np.random.Generator,
) -> List[float]:
    """Predictive-mean RMSE of each model on its own held-out part."""
    return [
        predictive_rmse(model, part.x, part.y, n_samples, rng)
        for model, part in zip(models, parts)
    ]


@dataclass(frozen=True, eq=False)
class LatentGrid:
    """Decoded functions over a standard-normal-quantile grid of latent codes."""

    z: np.ndarray
    x: np.ndarray
    curves: np.ndarray


def latent_grid_decode(
    mu_phi: np.ndarray,
    decoder_arch: Architecture,
    target_arch: Architecture,
    grid_n: int,
    x_grid: np.ndarray,
) -> LatentGrid:
    """
    Decode z on a grid_n x grid_n grid with coordinates Phi^-1((i + 1/2) / n)
    and evaluate each decoded network on ``x_grid``.

    Returns ``grid_n^2`` curves, row-major over (u_i, u_j).
    """
    if grid_n < 2:
        raise ConfigError(f"grid_n must be >= 2, got {grid_n}")
    if decoder_arch.input_dim != 2:
        raise ShapeMismatchError("latent dim", 2, decoder_arch.input_dim)
    coords = norm.ppf((np.arange(grid_n) + 0.5) / grid_n)
    z = np.array([[u, v] for u in coords for v in coords])
    x_grid = np.asarray(x_grid, dtype=float).reshape(-1, target_arch.input_dim)
    weights = decode_batch(decoder_arch, np.asarray(mu_phi, dtype=float), z)
    curves = forward(target_arch, weights, x_grid)[..., 0]
    return LatentGrid(z=z, x=x_grid[:, 0], curves=curves)


def phi_draws_for_fixed_z(
    q_phi: MeanFieldGaussian,
    decoder_arch: Architecture,
    target_arch: Architecture,
    z: np.ndarray,
    n: int,
    x_grid: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """(n, G) curves from n decoder draws phi ~ q(phi) at one fixed z."""
    z = np.asarray(z, dtype=float)
    if z.shape != (decoder_arch.input_dim,):
        raise ShapeMismatchError("z", (decoder_arch.input_dim,), z.shape)
    phi = q_phi.sample(rng.standard_normal((n, q_phi.size)))
    weights = decode_batch(decoder_arch, phi, np.repeat(z[None, :], n, axis=0))
    x_grid = np.asarray(x_grid, dtype=float).reshape(-1, target_arch.input_dim)
    return forward(target_arch, weights, x_grid)[..., 0]
