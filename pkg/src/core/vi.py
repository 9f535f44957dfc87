"""
Stage 3: mean-field black-box variational inference.

Two families share one training loop:
- ``ProjectedObjective``: q(z) q(phi) with weights w = g_phi(z) (Proj-BNN
  and its ablations); phi may be frozen to a point mass
- ``WeightSpaceObjective``: q(w) directly over the target weights (BbB)

The ELBO is estimated with the reparametrization trick,

    ELBO = (N / |B|) * mean_s log p(y_B | x_B, w_s) - KL(q || p)

with closed-form Gaussian KL terms, and maximized with Adam. Validation
marginal log-likelihood is checked every ``check_every`` iterations and
the best iterate is returned (early stopping with ``early_stop_patience``).

Random streams (spawned from ``cfg.seed``): 0 initialization, 1 minibatches,
2 reparametrization noise, 3 validation draws, 4 random decoder init.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import autograd.numpy as anp
import numpy as np
from autograd import value_and_grad

from ..data.dataset import Dataset
from ..utils.config import PcaeConfig, VarInferenceConfig
from ..utils.logging import get_logger
from ..utils.seeding import split_streams
from .ensemble import minibatches
from .errors import NonFiniteError, ShapeMismatchError
from .metrics import marginal_test_ll
from .models import (
    MeanFieldGaussian,
    Method,
    ObservationModel,
    PointMass,
    PriorSpec,
    SnapshotSet,
    TrainingTrace,
)
from .network import Architecture, decode_batch, log_likelihood
from .optim import Adam
from .projector import AutoencoderParams, init_autoencoder, train_pcae

logger = get_logger(__name__)

PhiPosterior = Union[MeanFieldGaussian, PointMass]

STREAM_INIT, STREAM_BATCH, STREAM_EPS, STREAM_EVAL, STREAM_DECODER = range(5)
N_STREAMS = 5


def _kl_diag(mu, log_std, prior_mean, prior_std):
    """KL(N(mu, exp(log_std)^2) || N(prior_mean, prior_std^2)), summed."""
    return anp.sum(
        anp.log(prior_std)
        - log_std
        + (anp.exp(2.0 * log_std) + (mu - prior_mean) ** 2) / (2.0 * prior_std**2)
        - 0.5
    )


def kl_gaussian_diag(
    q: MeanFieldGaussian, p: Union[PriorSpec, MeanFieldGaussian]
) -> float:
    """Closed-form KL(q || p) between diagonal Gaussians (p may be the prior)."""
    if isinstance(p, PriorSpec):
        return float(_kl_diag(q.mu, q.log_std, p.mean, p.std))
    if p.size != q.size:
        raise ShapeMismatchError("p", (q.size,), (p.size,))
    return float(_kl_diag(q.mu, q.log_std, p.mu, p.std))


def reparam_sample(q: PhiPosterior, eps: np.ndarray) -> np.ndarray:
    """v = mu + std * eps (the point mass ignores eps)."""
    return q.sample(eps)


def _data_term(target, weights, x, y, n_total, sigma_y):
    """(N / |B|) * mean_s log p(y_B | x_B, w_s); zero for an empty batch."""
    batch = x.shape[0]
    if batch == 0:
        return 0.0
    ll = log_likelihood(target, weights, x, y, sigma_y)
    return (n_total / batch) * anp.mean(ll)


@dataclass(eq=False)
class VariationalModel:
    """
    A fitted posterior approximation; draws target weights.

    Weight-space models carry ``q_w``; projected models carry ``q_z``,
    ``q_phi`` and the decoder architecture.
    """

    method: Method
    target_arch: Architecture
    q_w: Optional[MeanFieldGaussian] = None
    q_z: Optional[MeanFieldGaussian] = None
    q_phi: Optional[PhiPosterior] = None
    decoder_arch: Optional[Architecture] = None
    trace: TrainingTrace = field(default_factory=TrainingTrace)

    def __post_init__(self):
        self.method = Method(self.method)
        if self.q_w is None and (self.q_z is None or self.q_phi is None):
            raise ValueError("need q_w, or q_z together with q_phi")
        if self.q_w is not None and self.q_w.size != self.target_arch.num_params:
            raise ShapeMismatchError("q_w", self.target_arch.num_params, self.q_w.size)
        if self.q_z is not None:
            if self.decoder_arch is None:
                raise ValueError("projected models need a decoder architecture")
            if self.decoder_arch.input_dim != self.q_z.size:
                raise ShapeMismatchError("q_z", self.decoder_arch.input_dim, self.q_z.size)
            if self.decoder_arch.output_dim != self.target_arch.num_params:
                raise ShapeMismatchError(
                    "decoder output", self.target_arch.num_params, self.decoder_arch.output_dim
                )
            if self.q_phi.size != self.decoder_arch.num_params:
                raise ShapeMismatchError(
                    "q_phi", self.decoder_arch.num_params, self.q_phi.size
                )

    @property
    def is_projected(self) -> bool:
        return self.q_w is None

    def sample_weights(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """(n, D_w) draws; projected models draw z noise first, then phi noise."""
        if self.q_w is not None:
            return self.q_w.sample(rng.standard_normal((n, self.q_w.size)))
        z = self.q_z.sample(rng.standard_normal((n, self.q_z.size)))
        if self.q_phi.is_variational:
            phi = self.q_phi.sample(rng.standard_normal((n, self.q_phi.size)))
        else:
            phi = self.q_phi.values
        return decode_batch(self.decoder_arch, phi, z)

    def mean_weights(self) -> np.ndarray:
        """Weights at the variational means."""
        if self.q_w is not None:
            return self.q_w.mu
        return decode_batch(self.decoder_arch, self.q_phi.mu, self.q_z.mu[None, :])[0]

    def kl(self, prior: PriorSpec) -> float:
        if self.q_w is not None:
            return kl_gaussian_diag(self.q_w, prior)
        total = kl_gaussian_diag(self.q_z, prior)
        if self.q_phi.is_variational:
            total += kl_gaussian_diag(self.q_phi, prior)
        return total


class WeightSpaceObjective:
    """ELBO over q(w) = N(mu_w, diag(std_w^2)) (Bayes by Backprop)."""

    def __init__(
        self, target_arch: Architecture, obs: ObservationModel, prior: PriorSpec
    ):
        self.target_arch = target_arch
        self.obs = obs
        self.prior = prior
        self.size = target_arch.num_params

    def pack(self, q_w: MeanFieldGaussian) -> np.ndarray:
        return np.concatenate([q_w.mu, q_w.log_std])

    def unpack(self, flat: np.ndarray) -> MeanFieldGaussian:
        return MeanFieldGaussian(mu=flat[: self.size], log_std=flat[self.size :])

    def draw_eps(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, ...]:
        return (rng.standard_normal((n, self.size)),)

    def weights(self, flat, eps_w):
        mu, log_std = flat[: self.size], flat[self.size :]
        return mu + anp.exp(log_std) * eps_w

    def kl(self, flat):
        return _kl_diag(
            flat[: self.size], flat[self.size :], self.prior.mean, self.prior.std
        )

    def elbo(self, flat, x, y, n_total, eps_w):
        w = self.weights(flat, eps_w)
        data = _data_term(self.target_arch, w, x, y, n_total, self.obs.sigma_y)
        return data - self.kl(flat)

    def per_sample_loglik(self, flat, x, y, eps_w) -> np.ndarray:
        w = self.weights(np.asarray(flat), eps_w)
        return log_likelihood(self.target_arch, w, x, y, self.obs.sigma_y)

    def to_model(
        self, flat: np.ndarray, method: Method = Method.BBB, trace=None
    ) -> VariationalModel:
        return VariationalModel(
            method=method,
            target_arch=self.target_arch,
            q_w=self.unpack(flat),
            trace=trace or TrainingTrace(),
        )


class ProjectedObjective:
    """
    ELBO over q(z) q(phi) with w = g_phi(z).

    Flat layout: ``[mu_z, log_std_z, mu_phi, log_std_phi]``; the phi block is
    absent when phi is a point mass.
    """

    def __init__(
        self,
        decoder_arch: Architecture,
        target_arch: Architecture,
        obs: ObservationModel,
        prior: PriorSpec,
        fixed_phi: Optional[np.ndarray] = None,
    ):
        if decoder_arch.output_dim != target_arch.num_params:
            raise ShapeMismatchError(
                "decoder output", target_arch.num_params, decoder_arch.output_dim
            )
        self.decoder_arch = decoder_arch
        self.target_arch = target_arch
        self.obs = obs
        self.prior = prior
        self.z_dim = decoder_arch.input_dim
        self.phi_dim = decoder_arch.num_params
        self.fixed_phi = None if fixed_phi is None else np.asarray(fixed_phi, float)
        if self.fixed_phi is not None and self.fixed_phi.shape != (self.phi_dim,):
            raise ShapeMismatchError("phi", (self.phi_dim,), self.fixed_phi.shape)

    @property
    def phi_is_variational(self) -> bool:
        return self.fixed_phi is None

    def pack(self, q_z: MeanFieldGaussian, q_phi: PhiPosterior) -> np.ndarray:
        parts = [q_z.mu, q_z.log_std]
        if self.phi_is_variational:
            parts += [q_phi.mu, q_phi.log_std]
        return np.concatenate(parts)

    def unpack(self, flat: np.ndarray) -> Tuple[MeanFieldGaussian, PhiPosterior]:
        d = self.z_dim
        q_z = MeanFieldGaussian(mu=flat[:d], log_std=flat[d : 2 * d])
        if not self.phi_is_variational:
            return q_z, PointMass(self.fixed_phi)
        p, start = self.phi_dim, 2 * d
        q_phi = MeanFieldGaussian(
            mu=flat[start : start + p], log_std=flat[start + p : start + 2 * p]
        )
        return q_z, q_phi

    def draw_eps(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, ...]:
        eps_z = rng.standard_normal((n, self.z_dim))
        if not self.phi_is_variational:
            return (eps_z,)
        return (eps_z, rng.standard_normal((n, self.phi_dim)))

    def phi_samples(self, flat, eps_phi):
        if not self.phi_is_variational:
            return self.fixed_phi
        start, p = 2 * self.z_dim, self.phi_dim
        mu, log_std = flat[start : start + p], flat[start + p : start + 2 * p]
        return mu + anp.exp(log_std) * eps_phi

    def z_samples(self, flat, eps_z, offset: int = 0):
        d = self.z_dim
        mu, log_std = flat[offset : offset + d], flat[offset + d : offset + 2 * d]
        return mu + anp.exp(log_std) * eps_z

    def weights(self, flat, eps_z, eps_phi=None):
        z = self.z_samples(flat, eps_z)
        return decode_batch(self.decoder_arch, self.phi_samples(flat, eps_phi), z)

    def kl_phi(self, flat):
        start, p = 2 * self.z_dim, self.phi_dim
        return _kl_diag(
            flat[start : start + p],
            flat[start + p : start + 2 * p],
            self.prior.mean,
            self.prior.std,
        )

    def elbo(self, flat, x, y, n_total, eps_z, eps_phi=None):
        d = self.z_dim
        w = self.weights(flat, eps_z, eps_phi)
        data = _data_term(self.target_arch, w, x, y, n_total, self.obs.sigma_y)
        total = data - _kl_diag(
            flat[:d], flat[d : 2 * d], self.prior.mean, self.prior.std
        )
        if self.phi_is_variational:
            total = total - self.kl_phi(flat)
        return total

    def per_sample_loglik(self, flat, x, y, eps_z, eps_phi=None) -> np.ndarray:
        w = self.weights(np.asarray(flat), eps_z, eps_phi)
        return log_likelihood(self.target_arch, w, x, y, self.obs.sigma_y)

    def to_model(
        self, flat: np.ndarray, method: Method = Method.PROJBNN, trace=None
    ) -> VariationalModel:
        q_z, q_phi = self.unpack(flat)
        return VariationalModel(
            method=method,
            target_arch=self.target_arch,
            q_z=q_z,
            q_phi=q_phi,
            decoder_arch=self.decoder_arch,
            trace=trace or TrainingTrace(),
        )


def elbo_bbb(
    q_w: MeanFieldGaussian,
    target_arch: Architecture,
    x: np.ndarray,
    y: np.ndarray,
    n_total: int,
    obs: ObservationModel,
    prior: PriorSpec,
    eps_w: np.ndarray,
) -> float:
    """Reparametrized ELBO estimate for a weight-space posterior."""
    objective = WeightSpaceObjective(target_arch, obs, prior)
    if np.shape(eps_w)[-1] != objective.size:
        raise ShapeMismatchError("eps_w", f"(S, {objective.size})", np.shape(eps_w))
    return float(objective.elbo(objective.pack(q_w), x, y, n_total, eps_w))


def elbo_projbnn(
    q_z: MeanFieldGaussian,
    q_phi: PhiPosterior,
    decoder_arch: Architecture,
    target_arch: Architecture,
    x: np.ndarray,
    y: np.ndarray,
    n_total: int,
    obs: ObservationModel,
    prior: PriorSpec,
    eps_z: np.ndarray,
    eps_phi: Optional[np.ndarray] = None,
) -> float:
    """Reparametrized ELBO estimate for a projected posterior."""
    fixed = None if q_phi.is_variational else q_phi.values
    objective = ProjectedObjective(decoder_arch, target_arch, obs, prior, fixed)
    if q_z.size != objective.z_dim:
        raise ShapeMismatchError("q_z", objective.z_dim, q_z.size)
    if objective.phi_is_variational and eps_phi is None:
        raise ValueError("eps_phi is required for a variational q_phi")
    flat = objective.pack(q_z, q_phi)
    return float(objective.elbo(flat, x, y, n_total, eps_z, eps_phi))


@dataclass
class FitResult:
    params: np.ndarray
    trace: TrainingTrace


def fit_variational(
    init: np.ndarray,
    step: Callable[[np.ndarray, int], Tuple[float, np.ndarray]],
    validate: Callable[[np.ndarray], float],
    cfg: VarInferenceConfig,
    label: str = "vi",
) -> FitResult:
    """
    Maximize an ELBO with Adam and validation-based early stopping.

    ``step(params, iteration)`` returns the minibatch ELBO and its gradient;
    ``validate(params)`` returns the validation metric (higher is better).
    The metric at initialization is the baseline; training stops once
    ``early_stop_patience`` consecutive checks fail to improve on the best,
    and the best iterate is returned.
    """
    params = np.array(init, dtype=float)
    optimizer = Adam(cfg.lr)
    trace = TrainingTrace()

    best_value = validate(params)
    best_params = params.copy()
    trace.checks.append((0, best_value))
    bad_checks = 0

    logger.info(
        f"[{label}] VI: {params.size} variational parameters, "
        f"{cfg.max_iterations} max iterations, {cfg.mc_samples} MC samples"
    )
    for it in range(cfg.max_iterations):
        value, grad = step(params, it)
        trace.elbo.append((it, float(value)))
        params = optimizer.step(params, -grad)

        if (it + 1) % cfg.check_every != 0:
            continue
        current = validate(params)
        trace.checks.append((it + 1, current))
        logger.debug(
            f"[{label}] iteration {it + 1}: ELBO {float(value):.4f}, "
            f"valid LL {current:.4f}"
        )
        if current > best_value:
            best_value, best_params, bad_checks = current, params.copy(), 0
            trace.best_iteration = it + 1
        else:
            bad_checks += 1
            if bad_checks >= cfg.early_stop_patience:
                trace.stopped_early = True
                logger.info(f"[{label}] early stop at iteration {it + 1}")
                break

    logger.info(
        f"[{label}] done: best valid LL {best_value:.4f} "
        f"at iteration {trace.best_iteration}"
    )
    return FitResult(params=best_params, trace=trace)


def _init_mean(
    size: int, prior: PriorSpec, cfg: VarInferenceConfig, rng: np.random.Generator
) -> np.ndarray:
    return prior.mean + cfg.mean_init_std * rng.standard_normal(size)


def _make_step(objective, train: Dataset, cfg: VarInferenceConfig, batch_rng, eps_rng, stage):
    """Single-dataset ELBO step: minibatch, then noise, then value and gradient."""
    batches = minibatches(train.n, cfg.batch_size, batch_rng)
    elbo_and_grad = value_and_grad(objective.elbo)

    def step(params: np.ndarray, it: int) -> Tuple[float, np.ndarray]:
        idx = next(batches)
        xb, yb = train.x[idx], train.y[idx]
        eps = objective.draw_eps(eps_rng, cfg.mc_samples)
        value, grad = elbo_and_grad(params, xb, yb, train.n, *eps)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            per_sample = objective.per_sample_loglik(params, xb, yb, *eps)
            bad = np.flatnonzero(~np.isfinite(per_sample))
            raise NonFiniteError(
                "ELBO",
                stage=stage,
                iteration=it,
                sample_index=int(bad[0]) if bad.size else None,
            )
        return value, grad

    return step


def _make_validate(objective, valid: Dataset, cfg: VarInferenceConfig, method, eval_rng):
    def validate(params: np.ndarray) -> float:
        model = objective.to_model(params, method)
        return marginal_test_ll(
            model, valid.x, valid.y, objective.obs, cfg.eval_samples, eval_rng
        )

    return validate


def train_bbb(
    train: Dataset,
    valid: Dataset,
    target_arch: Architecture,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: VarInferenceConfig,
) -> VariationalModel:
    """Bayes by Backprop: mean-field VI directly over the target weights."""
    init_rng, batch_rng, eps_rng, eval_rng, _ = split_streams(cfg.seed, N_STREAMS)
    objective = WeightSpaceObjective(target_arch, obs, prior)
    q_w = MeanFieldGaussian.matching_prior(
        objective.size, prior, _init_mean(objective.size, prior, cfg, init_rng)
    )
    result = fit_variational(
        objective.pack(q_w),
        _make_step(objective, train, cfg, batch_rng, eps_rng, "vi"),
        _make_validate(objective, valid, cfg, Method.BBB, eval_rng),
        cfg,
        label="bbb",
    )
    return objective.to_model(result.params, Method.BBB, result.trace)


def train_projbnn(
    ae: AutoencoderParams,
    train: Dataset,
    valid: Dataset,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: VarInferenceConfig,
    freeze_phi: bool = False,
    method: Method = Method.PROJBNN,
) -> VariationalModel:
    """
    VI over (z, phi) through the autoencoder's decoder.

    q(z) starts at the prior; q(phi) is centred on the trained decoder with
    log std ~ N(phi_logstd_init_mean, phi_logstd_init_std^2). With
    ``freeze_phi`` the decoder is a point mass and only q(z) is learned.
    """
    init_rng, batch_rng, eps_rng, eval_rng, _ = split_streams(cfg.seed, N_STREAMS)
    fixed = ae.phi.values if freeze_phi else None
    objective = ProjectedObjective(ae.decoder_arch, ae.target_arch, obs, prior, fixed)

    q_z = MeanFieldGaussian.matching_prior(
        objective.z_dim, prior, _init_mean(objective.z_dim, prior, cfg, init_rng)
    )
    if freeze_phi:
        q_phi: PhiPosterior = PointMass(ae.phi.values)
    else:
        q_phi = MeanFieldGaussian(
            mu=ae.phi.values,
            log_std=init_rng.normal(
                cfg.phi_logstd_init_mean, cfg.phi_logstd_init_std, objective.phi_dim
            ),
        )

    result = fit_variational(
        objective.pack(q_z, q_phi),
        _make_step(objective, train, cfg, batch_rng, eps_rng, "vi"),
        _make_validate(objective, valid, cfg, method, eval_rng),
        cfg,
        label=str(method),
    )
    return objective.to_model(result.params, method, result.trace)


def random_autoencoder(
    target_arch: Architecture,
    latent_dim: int,
    hidden: Sequence[int],
    activation: str,
    prior: PriorSpec,
    seed: int,
) -> AutoencoderParams:
    """Untrained autoencoder with N(0, prior.variance) weights (decoder stream)."""
    rng = split_streams(seed, N_STREAMS)[STREAM_DECODER]
    return init_autoencoder(target_arch, latent_dim, hidden, activation, rng, prior.std)


def train_ablation(
    kind: Method | str,
    train: Dataset,
    valid: Dataset,
    obs: ObservationModel,
    prior: PriorSpec,
    cfg: VarInferenceConfig,
    *,
    target_arch: Architecture,
    pcae_cfg: Optional[PcaeConfig] = None,
    ae: Optional[AutoencoderParams] = None,
    snapshots: Optional[SnapshotSet] = None,
) -> VariationalModel:
    """
    Proj-BNN variants.

    - linear: affine encoder/decoder trained on the snapshots, then full VI
    - one_stage: randomly initialized decoder, no snapshots or autoencoder
    - qz_only: trained decoder frozen, only q(z) is learned
    """
    kind = Method(kind)
    pcae_cfg = pcae_cfg or PcaeConfig()

    if kind is Method.LINEAR:
        if snapshots is None:
            raise ValueError("the linear ablation needs snapshots")
        linear_cfg = dataclasses.replace(pcae_cfg, hidden=[])
        ae = train_pcae(snapshots, train, obs, linear_cfg, target_arch)
        return train_projbnn(ae, train, valid, obs, prior, cfg, method=kind)

    if kind is Method.ONE_STAGE:
        random_ae = random_autoencoder(
            target_arch,
            pcae_cfg.latent_dim,
            pcae_cfg.hidden,
            pcae_cfg.activation,
            prior,
            cfg.seed,
        )
        return train_projbnn(random_ae, train, valid, obs, prior, cfg, method=kind)

    if kind is Method.QZ_ONLY:
        if ae is None:
            raise ValueError("the qz_only ablation needs a trained autoencoder")
        return train_projbnn(
            ae, train, valid, obs, prior, cfg, freeze_phi=True, method=kind
        )

    raise ValueError(f"'{kind}' is not an ablation (expected linear, one_stage, qz_only)")


__all__: List[str] = [
    "FitResult",
    "PhiPosterior",
    "ProjectedObjective",
    "VariationalModel",
    "WeightSpaceObjective",
    "elbo_bbb",
    "elbo_projbnn",
    "fit_variational",
    "kl_gaussian_diag",
    "random_autoencoder",
    "reparam_sample",
    "train_ablation",
    "train_bbb",
    "train_projbnn",
]

