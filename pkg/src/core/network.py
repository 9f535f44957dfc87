"""
Fully-connected networks over flat weight vectors.

Every network in the system (target, encoder, decoder) is described by an
``Architecture`` and evaluated from a single flat parameter vector so that
weights can be sampled, decoded and differentiated as plain arrays.

Layout: each layer is a ``(fan_in + 1, fan_out)`` block in C order with the
bias as the last row (``(fan_in, fan_out)`` when the network has no bias).
``[1, 1, 1]`` with bias therefore flattens to ``(w1, b1, w2, b2)``.

All functions here are written with ``autograd.numpy`` so they can be
traced for gradients, and broadcast over leading batch axes of the weights:
``forward(arch, W, x)`` with ``W`` of shape ``(S, D_w)`` and ``x`` of shape
``(N, D_in)`` returns ``(S, N, D_out)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Sequence, Tuple

import autograd.numpy as anp
import numpy as np
from autograd import value_and_grad

from .errors import FingerprintMismatchError, NonFiniteError, ShapeMismatchError

LOG_2PI = math.log(2.0 * math.pi)


class Activation(str, Enum):
    """Hidden-layer nonlinearity."""

    RELU = "relu"
    RBF = "rbf"
    TANH = "tanh"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Architecture:
    """
    Shape of a fully-connected network.

    Attributes:
        layer_sizes: Widths from input to output, e.g. ``(1, 50, 1)``.
        activation: Nonlinearity applied after every hidden layer.
        rbf_center: Center c of ``exp(-((x - c) / l)^2)``.
        rbf_lengthscale: Lengthscale l of the RBF activation.
        use_bias: Whether each layer has a bias row.
    """

    layer_sizes: Tuple[int, ...]
    activation: Activation = Activation.RELU
    rbf_center: float = 0.0
    rbf_lengthscale: float = 1.0
    use_bias: bool = True

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ShapeMismatchError("layer_sizes", "at least 2 entries", len(sizes))
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activation", Activation(self.activation))
        object.__setattr__(self, "rbf_center", float(self.rbf_center))
        object.__setattr__(self, "rbf_lengthscale", float(self.rbf_lengthscale))
        if not self.rbf_lengthscale > 0:
            raise ValueError("rbf_lengthscale must be > 0")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def hidden_sizes(self) -> Tuple[int, ...]:
        return self.layer_sizes[1:-1]

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        extra = 1 if self.use_bias else 0
        return [
            (fan_in + extra, fan_out)
            for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        ]

    @property
    def num_params(self) -> int:
        """D_w: total number of weights and biases."""
        return sum(rows * cols for rows, cols in self.layer_shapes)

    @property
    def fingerprint(self) -> str:
        """Stable 16-hex-char digest of the architecture description."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def require_hidden(self) -> "Architecture":
        """Target networks need at least one hidden layer."""
        if len(self.layer_sizes) < 3:
            raise ShapeMismatchError(
                "target layer_sizes", "at least 3 entries", len(self.layer_sizes)
            )
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "layer_sizes": list(self.layer_sizes),
            "activation": str(self.activation),
            "rbf_center": self.rbf_center,
            "rbf_lengthscale": self.rbf_lengthscale,
            "use_bias": self.use_bias,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Architecture":
        return cls(
            layer_sizes=tuple(data["layer_sizes"]),
            activation=Activation(data.get("activation", "relu")),
            rbf_center=data.get("rbf_center", 0.0),
            rbf_lengthscale=data.get("rbf_lengthscale", 1.0),
            use_bias=data.get("use_bias", True),
        )

    @classmethod
    def mlp(
        cls,
        input_dim: int,
        hidden: Sequence[int],
        output_dim: int,
        activation: Activation | str = Activation.RELU,
        **kwargs: Any,
    ) -> "Architecture":
        return cls(
            layer_sizes=(input_dim, *hidden, output_dim),
            activation=Activation(activation),
            **kwargs,
        )


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Flat, finite weight vector tagged with its architecture's fingerprint."""

    values: np.ndarray
    arch_fingerprint: str

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("WeightVector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def for_arch(cls, arch: Architecture, values: Any) -> "WeightVector":
        vec = cls(values=values, arch_fingerprint=arch.fingerprint)
        if len(vec) != arch.num_params:
            raise ShapeMismatchError("weights", (arch.num_params,), (len(vec),))
        return vec

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def check(self, arch: Architecture) -> np.ndarray:
        """Return the raw values after verifying they belong to ``arch``."""
        if self.arch_fingerprint != arch.fingerprint:
            raise FingerprintMismatchError(arch.fingerprint, self.arch_fingerprint)
        return self.values


@dataclass(frozen=True)
class GradientRequest:
    """A scalar loss over a flat parameter vector."""

    loss: Callable[[Any], Any]
    params: np.ndarray


def activation_apply(
    kind: Activation | str,
    x: Any,
    rbf_center: float = 0.0,
    rbf_lengthscale: float = 1.0,
) -> Any:
    """Apply a nonlinearity elementwise (scalars and arrays alike)."""
    kind = Activation(kind)
    if kind is Activation.RELU:
        return anp.maximum(0.0, x)
    if kind is Activation.TANH:
        return anp.tanh(x)
    return anp.exp(-(((x - rbf_center) / rbf_lengthscale) ** 2))


def unflatten_layers(arch: Architecture, weights: Any) -> List[Any]:
    """Split ``(..., D_w)`` weights into per-layer ``(..., rows, cols)`` blocks."""
    if weights.shape[-1] != arch.num_params:
        raise ShapeMismatchError("weights", f"(..., {arch.num_params})", weights.shape)
    lead = tuple(weights.shape[:-1])
    layers = []
    start = 0
    for rows, cols in arch.layer_shapes:
        stop = start + rows * cols
        layers.append(anp.reshape(weights[..., start:stop], lead + (rows, cols)))
        start = stop
    return layers


def forward(arch: Architecture, weights: Any, x: Any) -> Any:
    """
    Evaluate f_w(x).

    Args:
        arch: Network description.
        weights: ``(D_w,)`` or ``(..., D_w)`` flat weights.
        x: ``(..., N, D_in)`` inputs, broadcast against the weight batch.

    Returns:
        ``(..., N, D_out)`` outputs; hidden layers use ``arch.activation``,
        the output layer is linear.
    """
    if anp.shape(x)[-1] != arch.input_dim:
        raise ShapeMismatchError("x", f"(..., {arch.input_dim})", anp.shape(x))

    layers = unflatten_layers(arch, weights)
    last = len(layers) - 1
    h = x
    for i, block in enumerate(layers):
        if arch.use_bias:
            h = anp.matmul(h, block[..., :-1, :]) + block[..., -1:, :]
        else:
            h = anp.matmul(h, block)
        if i < last:
            h = activation_apply(
                arch.activation, h, arch.rbf_center, arch.rbf_lengthscale
            )
    return h


def decode_batch(decoder: Architecture, phi: Any, z: Any) -> Any:
    """
    Map latent codes to target weights.

    ``phi`` is either one decoder vector ``(D_phi,)`` shared by all codes or
    a batch ``(S, D_phi)`` paired row-by-row with ``z`` of shape ``(S, D_z)``.
    Returns ``(S, D_w)``.
    """
    if anp.ndim(phi) == 1:
        return forward(decoder, phi, z)
    return forward(decoder, phi, z[:, None, :])[:, 0, :]


def log_normal(value: Any, mean: Any, std: Any) -> Any:
    """Elementwise Gaussian log-density (no validation; traced by autograd)."""
    return -0.5 * LOG_2PI - anp.log(std) - (value - mean) ** 2 / (2.0 * std**2)


def gaussian_log_density(value: Any, mean: Any, std: Any) -> Any:
    """
    Sum of elementwise Gaussian log-densities log N(value | mean, std^2).

    Scalars broadcast; otherwise ``value`` and ``mean`` must match in shape.
    """
    if anp.ndim(std) == 0 and not std > 0:
        raise ValueError(f"std must be > 0, got {std}")
    v_shape, m_shape = anp.shape(value), anp.shape(mean)
    if v_shape and m_shape and v_shape != m_shape:
        raise ShapeMismatchError("mean", v_shape, m_shape)
    return anp.sum(log_normal(value, mean, std))


def log_likelihood(
    arch: Architecture, weights: Any, x: Any, y: Any, sigma_y: float
) -> Any:
    """Per-weight-sample data log-likelihood, summed over points and outputs."""
    pred = forward(arch, weights, x)
    return anp.sum(log_normal(y, pred, sigma_y), axis=(-2, -1))


def log_joint(
    arch: Architecture,
    weights: WeightVector,
    x: np.ndarray,
    y: np.ndarray,
    sigma_y: float,
    prior_std: float,
    prior_mean: float = 0.0,
) -> float:
    """log p(y | x, w) + log p(w) for one fingerprint-checked weight vector."""
    values = weights.check(arch)
    if anp.shape(y)[-1] != arch.output_dim:
        raise ShapeMismatchError("y", f"(N, {arch.output_dim})", anp.shape(y))
    if not prior_std > 0:
        raise ValueError("prior_std must be > 0")
    total = log_likelihood(arch, values, x, y, sigma_y) + gaussian_log_density(
        values, prior_mean, prior_std
    )
    return float(total)


def gradient(request: GradientRequest) -> np.ndarray:
    """
    Exact gradient of ``request.loss`` at ``request.params``.

    Raises:
        NonFiniteError: If the loss or any gradient component is NaN/inf.
    """
    params = np.asarray(request.params, dtype=float)
    value, grad = value_and_grad(request.loss)(params)
    if not np.isfinite(value):
        raise NonFiniteError("loss", detail=f"value={value}")
    grad = np.asarray(grad, dtype=float)
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NonFiniteError("gradient", detail=f"components {bad[:5].tolist()}")
    return grad


def init_weights(
    arch: Architecture, rng: np.random.Generator, scale: float = 0.1
) -> np.ndarray:
    """Seeded N(0, scale^2) initialization of a flat weight vector."""
    return rng.normal(0.0, scale, size=arch.num_params)
