"""
Stage 2: prediction-constrained autoencoder over weight snapshots.

An encoder g_theta: R^{D_w} -> R^{D_z} and decoder g_phi: R^{D_z} -> R^{D_w}
are fit jointly to minimize

    mean_r ||w_r - h(w_r + gamma_r)||^2  -  beta * mean_r (1/N) log p(y | x, h(w_r + gamma_r))

with h = g_phi o g_theta and input noise gamma ~ N(0, input_noise_std^2 I).
The decoder is what later stages sample through.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import autograd.numpy as anp
import numpy as np
from autograd import value_and_grad

from ..data.dataset import Dataset
from ..utils.config import PcaeConfig
from ..utils.logging import get_logger
from ..utils.seeding import split_streams
from .ensemble import minibatches
from .errors import NonFiniteError, ShapeMismatchError
from .models import ObservationModel, SnapshotSet
from .network import Activation, Architecture, WeightVector, forward, log_likelihood
from .optim import Adam

logger = get_logger(__name__)


@dataclass(frozen=True)
class PcaeReport:
    """Training summary of an autoencoder fit."""

    iterations: int
    initial_loss: float
    final_loss: float
    reconstruction_mse: float
    decoded_train_ll: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "reconstruction_mse": self.reconstruction_mse,
            "decoded_train_ll": self.decoded_train_ll,
        }


@dataclass(frozen=True, eq=False)
class AutoencoderParams:
    """Encoder/decoder pair tied to one target architecture."""

    encoder_arch: Architecture
    decoder_arch: Architecture
    target_arch: Architecture
    theta: WeightVector
    phi: WeightVector
    report: Optional[PcaeReport] = None
    full_rank: bool = False

    def __post_init__(self):
        d_w = self.target_arch.num_params
        d_z = self.decoder_arch.input_dim
        if self.encoder_arch.input_dim != d_w:
            raise ShapeMismatchError("encoder input", d_w, self.encoder_arch.input_dim)
        if self.decoder_arch.output_dim != d_w:
            raise ShapeMismatchError("decoder output", d_w, self.decoder_arch.output_dim)
        if self.encoder_arch.output_dim != d_z:
            raise ShapeMismatchError("encoder output", d_z, self.encoder_arch.output_dim)
        if d_z >= d_w and not (self.full_rank and d_z == d_w):
            raise ValueError(f"latent dim {d_z} must be below weight dim {d_w}")
        self.theta.check(self.encoder_arch)
        self.phi.check(self.decoder_arch)
        if len(self.theta) != self.encoder_arch.num_params:
            raise ShapeMismatchError("theta", self.encoder_arch.num_params, len(self.theta))
        if len(self.phi) != self.decoder_arch.num_params:
            raise ShapeMismatchError("phi", self.decoder_arch.num_params, len(self.phi))

    @property
    def latent_dim(self) -> int:
        return self.decoder_arch.input_dim

    @property
    def weight_dim(self) -> int:
        return self.target_arch.num_params

    def with_report(self, report: PcaeReport) -> "AutoencoderParams":
        return AutoencoderParams(
            self.encoder_arch,
            self.decoder_arch,
            self.target_arch,
            self.theta,
            self.phi,
            report,
            self.full_rank,
        )


def autoencoder_architectures(
    target_arch: Architecture,
    latent_dim: int,
    hidden: Sequence[int] = (),
    activation: Activation | str = Activation.RBF,
) -> Tuple[Architecture, Architecture]:
    """
    Mirror-image encoder/decoder pair.

    With no hidden layers both maps are affine (the linear variant).
    """
    d_w = target_arch.num_params
    if not 1 <= latent_dim < d_w:
        raise ValueError(f"latent_dim must be in [1, {d_w}), got {latent_dim}")
    hidden = tuple(hidden)
    encoder = Architecture((d_w, *hidden, latent_dim), Activation(activation))
    decoder = Architecture((latent_dim, *reversed(hidden), d_w), Activation(activation))
    return encoder, decoder


def init_autoencoder(
    target_arch: Architecture,
    latent_dim: int,
    hidden: Sequence[int],
    activation: Activation | str,
    rng: np.random.Generator,
    init_std: float = 0.1,
) -> AutoencoderParams:
    """Seeded N(0, init_std^2) encoder and decoder weights."""
    encoder, decoder = autoencoder_architectures(
        target_arch, latent_dim, hidden, activation
    )
    theta = rng.normal(0.0, init_std, size=encoder.num_params)
    phi = rng.normal(0.0, init_std, size=decoder.num_params)
    return AutoencoderParams(
        encoder_arch=encoder,
        decoder_arch=decoder,
        target_arch=target_arch,
        theta=WeightVector.for_arch(encoder, theta),
        phi=WeightVector.for_arch(decoder, phi),
    )


def _as_rows(values: Any, width: int, name: str) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(values, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != width:
        raise ShapeMismatchError(name, f"(..., {width})", arr.shape)
    return arr, single


def encode(params: AutoencoderParams, w: Any) -> np.ndarray:
    """z = g_theta(w) for one weight vector (D_w,) or a batch (R, D_w)."""
    if isinstance(w, WeightVector):
        w = w.check(params.target_arch)
    rows, single = _as_rows(w, params.weight_dim, "w")
    z = forward(params.encoder_arch, params.theta.values, rows)
    return z[0] if single else z


def decode_many(params: AutoencoderParams, z: Any) -> np.ndarray:
    """(S, D_z) latent codes -> (S, D_w) target weights."""
    rows, _ = _as_rows(z, params.latent_dim, "z")
    return forward(params.decoder_arch, params.phi.values, rows)


def decode(params: AutoencoderParams, z: Any) -> WeightVector:
    """One latent code -> target weights carrying the target fingerprint."""
    z = np.asarray(z, dtype=float)
    if z.shape != (params.latent_dim,):
        raise ShapeMismatchError("z", (params.latent_dim,), z.shape)
    return WeightVector.for_arch(params.target_arch, decode_many(params, z)[0])


def _pcae_objective(
    flat,
    n_theta,
    encoder,
    decoder,
    target,
    snapshots,
    gamma,
    x,
    y,
    sigma_y,
    beta,
):
    theta, phi = flat[:n_theta], flat[n_theta:]
    z = forward(encoder, theta, snapshots + gamma)
    recon = forward(decoder, phi, z)
    mse = anp.mean(anp.sum((snapshots - recon) ** 2, axis=1))
    if beta == 0:
        return mse
    ll = anp.mean(log_likelihood(target, recon, x, y, sigma_y)) / x.shape[0]
    return mse - beta * ll


_pcae_value_and_grad = value_and_grad(_pcae_objective)


def pcae_loss(
    params: AutoencoderParams,
    snapshots: np.ndarray,
    data: Dataset,
    obs: ObservationModel,
    beta: float,
    gamma: Optional[np.ndarray] = None,
) -> float:
    """
    Autoencoder objective for a batch of snapshots and fixed input noise.

    ``gamma`` defaults to zero noise.
    """
    snapshots, _ = _as_rows(snapshots, params.weight_dim, "snapshots")
    gamma = np.zeros_like(snapshots) if gamma is None else np.asarray(gamma, float)
    if gamma.shape != snapshots.shape:
        raise ShapeMismatchError("gamma", snapshots.shape, gamma.shape)
    flat = np.concatenate([params.theta.values, params.phi.values])
    value = _pcae_objective(
        flat,
        len(params.theta),
        params.encoder_arch,
        params.decoder_arch,
        params.target_arch,
        snapshots,
        gamma,
        data.x,
        data.y,
        obs.sigma_y,
        beta,
    )
    return float(value)


def reconstruction_mse(params: AutoencoderParams, snapshots: np.ndarray) -> float:
    """mean_r ||w_r - h(w_r)||^2 without input noise."""
    recon = decode_many(params, encode(params, snapshots))
    return float(np.mean(np.sum((snapshots - recon) ** 2, axis=1)))


def decoded_train_ll(
    params: AutoencoderParams,
    snapshots: np.ndarray,
    data: Dataset,
    obs: ObservationModel,
) -> float:
    """Mean per-point train log-likelihood of the reconstructed snapshots."""
    recon = decode_many(params, encode(params, snapshots))
    ll = log_likelihood(params.target_arch, recon, data.x, data.y, obs.sigma_y)
    return float(np.mean(ll) / data.n)


def train_pcae(
    snapshots: SnapshotSet,
    data: Dataset,
    obs: ObservationModel,
    cfg: PcaeConfig,
    target_arch: Architecture,
) -> AutoencoderParams:
    """
    Fit the prediction-constrained autoencoder with Adam.

    Each iteration uses a minibatch of snapshots, a minibatch of training
    points (all of them unless ``data_batch_size`` is set) and fresh input
    noise.
    """
    snapshots.check_fingerprint(target_arch.fingerprint)
    init_rng, batch_rng, noise_rng = split_streams(cfg.seed, 3)
    params = init_autoencoder(
        target_arch, cfg.latent_dim, cfg.hidden, cfg.activation, init_rng, cfg.init_std
    )
    matrix = snapshots.matrix
    n_theta = len(params.theta)
    flat = np.concatenate([params.theta.values, params.phi.values])

    snapshot_batches = minibatches(len(snapshots), cfg.batch_over_snapshots, batch_rng)
    data_batches = minibatches(data.n, cfg.data_batch_size or data.n, batch_rng)
    optimizer = Adam(cfg.lr)

    logger.info(
        f"Training pcAE: D_w={params.weight_dim}, D_z={params.latent_dim}, "
        f"hidden={list(cfg.hidden)}, beta={cfg.beta}, {cfg.iterations} iterations"
    )
    initial_loss = pcae_loss(params, matrix, data, obs, cfg.beta)
    report_every = max(1, cfg.iterations // 10)
    value = initial_loss
    for it in range(cfg.iterations):
        rows = next(snapshot_batches)
        idx = next(data_batches)
        batch = matrix[rows]
        gamma = noise_rng.normal(0.0, cfg.input_noise_std, size=batch.shape)
        value, grad = _pcae_value_and_grad(
            flat,
            n_theta,
            params.encoder_arch,
            params.decoder_arch,
            target_arch,
            batch,
            gamma,
            data.x[idx],
            data.y[idx],
            obs.sigma_y,
            cfg.beta,
        )
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NonFiniteError("pcAE loss", stage="pcae", iteration=it)
        flat = optimizer.step(flat, grad)
        if (it + 1) % report_every == 0:
            logger.debug(f"pcAE iteration {it + 1}: loss {float(value):.5f}")

    trained = AutoencoderParams(
        encoder_arch=params.encoder_arch,
        decoder_arch=params.decoder_arch,
        target_arch=target_arch,
        theta=WeightVector.for_arch(params.encoder_arch, flat[:n_theta]),
        phi=WeightVector.for_arch(params.decoder_arch, flat[n_theta:]),
    )
    report = PcaeReport(
        iterations=cfg.iterations,
        initial_loss=initial_loss,
        final_loss=pcae_loss(trained, matrix, data, obs, cfg.beta),
        reconstruction_mse=reconstruction_mse(trained, matrix),
        decoded_train_ll=decoded_train_ll(trained, matrix, data, obs),
    )
    logger.info(
        f"pcAE done: reconstruction MSE {report.reconstruction_mse:.5f}, "
        f"decoded train LL {report.decoded_train_ll:.4f}"
    )
    return trained.with_report(report)


def identity_decoder(target_arch: Architecture) -> AutoencoderParams:
    """
    Affine identity encoder/decoder (D_z = D_w).

    Sampling through it is exactly sampling the weights themselves.
    """
    d_w = target_arch.num_params
    arch = Architecture((d_w, d_w), Activation.RELU)
    identity = np.vstack([np.eye(d_w), np.zeros((1, d_w))]).reshape(-1)
    vec = WeightVector.for_arch(arch, identity)
    return AutoencoderParams(
        encoder_arch=arch,
        decoder_arch=arch,
        target_arch=target_arch,
        theta=vec,
        phi=vec,
        full_rank=True,
    )
