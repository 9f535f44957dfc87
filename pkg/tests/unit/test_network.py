"""
Unit tests for the network module.
"""

import math

import autograd.numpy as anp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from src.core.errors import FingerprintMismatchError, NonFiniteError, ShapeMismatchError
from src.core.network import (
    Activation,
    Architecture,
    GradientRequest,
    WeightVector,
    activation_apply,
    forward,
    gaussian_log_density,
    gradient,
    log_joint,
    log_normal,
    unflatten_layers,
)


def _central_differences(loss, params, h=1e-5):
    grad = np.zeros_like(params)
    for i in range(params.size):
        step = np.zeros_like(params)
        step[i] = h
        grad[i] = (loss(params + step) - loss(params - step)) / (2 * h)
    return grad


class TestActivation:
    def test_rbf_at_center_is_one(self):
        assert activation_apply(Activation.RBF, 0.0) == pytest.approx(1.0)

    def test_relu_clamps_negative(self):
        assert activation_apply("relu", -2.0) == 0.0

    def test_tanh_at_origin(self):
        assert activation_apply("tanh", 0.0) == 0.0

    def test_rbf_uses_center_and_lengthscale(self):
        value = activation_apply("rbf", 3.0, rbf_center=1.0, rbf_lengthscale=2.0)
        assert value == pytest.approx(math.exp(-1.0))


class TestArchitecture:
    def test_param_counts(self):
        assert Architecture((1, 1, 1)).num_params == 4
        assert Architecture((13, 50, 1)).num_params == 751

    def test_no_bias_param_count(self):
        assert Architecture((3, 2), use_bias=False).num_params == 6

    def test_fingerprint_is_stable_and_discriminating(self):
        a = Architecture((1, 20, 1), Activation.RBF)
        b = Architecture.from_dict(a.to_dict())
        c = Architecture((1, 20, 1), Activation.TANH)
        assert a.fingerprint == b.fingerprint
        assert len(a.fingerprint) == 16
        assert a.fingerprint != c.fingerprint

    def test_target_needs_hidden_layer(self):
        with pytest.raises(ShapeMismatchError):
            Architecture((1, 1)).require_hidden()

    def test_rejects_single_layer(self):
        with pytest.raises(ShapeMismatchError):
            Architecture((3,))


class TestForward:
    def test_zero_network(self):
        arch = Architecture((1, 1, 1), Activation.RELU)
        out = forward(arch, np.zeros(4), np.array([[5.0]]))
        assert out.shape == (1, 1)
        assert out[0, 0] == 0.0

    def test_identity_path(self):
        arch = Architecture((1, 1, 1), Activation.RELU)
        out = forward(arch, np.array([1.0, 0.0, 1.0, 0.0]), np.array([[2.0]]))
        assert out[0, 0] == pytest.approx(2.0)

    def test_rbf_identity_path_at_zero(self):
        arch = Architecture((1, 1, 1), Activation.RBF)
        out = forward(arch, np.array([1.0, 0.0, 1.0, 0.0]), np.array([[0.0]]))
        assert out[0, 0] == pytest.approx(1.0)

    def test_batched_weights(self):
        arch = Architecture((2, 3, 1), Activation.TANH)
        rng = np.random.default_rng(0)
        weights = rng.normal(size=(5, arch.num_params))
        x = rng.normal(size=(7, 2))
        batched = forward(arch, weights, x)
        assert batched.shape == (5, 7, 1)
        np.testing.assert_array_equal(batched[2], forward(arch, weights[2], x))

    def test_deterministic(self):
        arch = Architecture((1, 5, 1), Activation.RBF)
        w = np.random.default_rng(1).normal(size=arch.num_params)
        x = np.linspace(-1, 1, 9)[:, None]
        np.testing.assert_array_equal(forward(arch, w, x), forward(arch, w, x))

    def test_input_dimension_mismatch(self):
        arch = Architecture((2, 3, 1))
        with pytest.raises(ShapeMismatchError):
            forward(arch, np.zeros(arch.num_params), np.zeros((4, 3)))

    def test_weight_length_mismatch(self):
        arch = Architecture((1, 3, 1))
        with pytest.raises(ShapeMismatchError):
            forward(arch, np.zeros(arch.num_params + 1), np.zeros((4, 1)))


def test_unflatten_layout_is_bias_row_last():
    arch = Architecture((1, 1, 1))
    layers = unflatten_layers(arch, np.array([1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_array_equal(layers[0], [[1.0], [2.0]])
    np.testing.assert_array_equal(layers[1], [[3.0], [4.0]])
    flat = np.concatenate([layer.reshape(-1) for layer in layers])
    np.testing.assert_array_equal(flat, [1.0, 2.0, 3.0, 4.0])


@given(
    st.lists(st.integers(1, 4), min_size=2, max_size=4),
    st.booleans(),
    st.integers(0, 2**32 - 1),
)
def test_unflatten_is_a_bijection(sizes, use_bias, seed):
    arch = Architecture(tuple(sizes), Activation.TANH, use_bias=use_bias)
    flat = np.random.default_rng(seed).normal(size=arch.num_params)

    layers = unflatten_layers(arch, flat)
    assert [layer.shape for layer in layers] == list(arch.layer_shapes)
    np.testing.assert_array_equal(np.concatenate([layer.reshape(-1) for layer in layers]), flat)

    batched = unflatten_layers(arch, np.stack([flat, -flat]))
    for single, pair in zip(layers, batched):
        np.testing.assert_array_equal(pair[0], single)
        np.testing.assert_array_equal(pair[1], -single)


class TestGaussianLogDensity:
    @pytest.mark.parametrize(
        "value,mean,std,expected",
        [
            (0.0, 0.0, 0.1, 1.383647),
            (0.0, 0.0, 1.0, -0.918939),
            (1.0, 0.0, 1.0, -1.418939),
        ],
    )
    def test_examples(self, value, mean, std, expected):
        assert gaussian_log_density(value, mean, std) == pytest.approx(expected, abs=1e-6)

    def test_rejects_non_positive_std(self):
        with pytest.raises(ValueError):
            gaussian_log_density(0.0, 0.0, 0.0)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            gaussian_log_density(np.zeros(2), np.zeros(3), 1.0)

    @pytest.mark.parametrize("std", [0.1, 1.0])
    def test_density_integrates_to_one(self, std):
        grid = np.linspace(-10 * std, 10 * std, 20001)
        density = np.exp(log_normal(grid, 0.0, std))
        assert trapezoid(density, grid) == pytest.approx(1.0, rel=0.01)


class TestLogJoint:
    def test_conjugate_mode(self, linear_arch):
        """Maximizer of the 1-D linear model log joint is 100/110."""
        x, y = np.array([[1.0]]), np.array([[1.0]])
        prior_std = math.sqrt(0.1)

        def value(w):
            return log_joint(
                linear_arch, WeightVector.for_arch(linear_arch, [w]), x, y, 0.1, prior_std
            )

        w_star = 100.0 / 110.0
        assert value(w_star) > value(w_star + 1e-3)
        assert value(w_star) > value(w_star - 1e-3)

    def test_is_likelihood_plus_prior(self, linear_arch):
        w = WeightVector.for_arch(linear_arch, [0.0])
        expected = gaussian_log_density(1.0, 0.0, 0.1) + gaussian_log_density(
            0.0, 0.0, math.sqrt(0.1)
        )
        got = log_joint(linear_arch, w, np.array([[1.0]]), np.array([[1.0]]), 0.1, math.sqrt(0.1))
        assert got == pytest.approx(expected)

    def test_rejects_foreign_weights(self, linear_arch):
        other = Architecture((1, 2, 1))
        w = WeightVector.for_arch(other, np.zeros(other.num_params))
        with pytest.raises(FingerprintMismatchError):
            log_joint(linear_arch, w, np.ones((1, 1)), np.ones((1, 1)), 0.1, 1.0)


class TestGradient:
    def test_quadratic(self):
        grad = gradient(GradientRequest(lambda p: anp.sum(p**2), np.array([1.0, 2.0])))
        np.testing.assert_allclose(grad, [2.0, 4.0])

    def test_gaussian_mean(self):
        grad = gradient(
            GradientRequest(lambda p: gaussian_log_density(0.0, p, 1.0), np.array([0.5]))
        )
        np.testing.assert_allclose(grad, [-0.5])

    def test_matches_finite_differences(self):
        arch = Architecture((3, 5, 2), Activation.RELU)
        rng = np.random.default_rng(42)
        x = rng.normal(size=(10, 3))
        y = rng.normal(size=(10, 2))
        params = rng.normal(size=arch.num_params)

        def loss(w):
            return anp.sum((forward(arch, w, x) - y) ** 2)

        exact = gradient(GradientRequest(loss, params))
        numeric = _central_differences(lambda w: float(loss(w)), params)
        np.testing.assert_allclose(exact, numeric, rtol=1e-4, atol=1e-6)

    def test_non_finite_loss_is_reported(self):
        with pytest.raises(NonFiniteError):
            gradient(GradientRequest(lambda p: anp.sum(anp.log(p)), np.array([-1.0])))


def test_weight_vector_rejects_nan():
    with pytest.raises(NonFiniteError):
        WeightVector(values=[0.0, np.nan], arch_fingerprint="x")
