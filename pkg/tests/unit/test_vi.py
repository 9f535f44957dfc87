"""
Unit tests for variational inference.
"""

import dataclasses
import math

import numpy as np
import pytest
from autograd import grad
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, norm

from src.core.models import MeanFieldGaussian, Method, PointMass, PriorSpec, SnapshotSet
from src.core.network import Activation, Architecture
from src.core.projector import identity_decoder, init_autoencoder
from src.core.vi import (
    ProjectedObjective,
    WeightSpaceObjective,
    elbo_bbb,
    elbo_projbnn,
    fit_variational,
    kl_gaussian_diag,
    reparam_sample,
    train_ablation,
    train_bbb,
    train_projbnn,
)
from src.data.dataset import Dataset
from src.utils.config import PcaeConfig, VarInferenceConfig

STD_NORMAL = PriorSpec(mean=0.0, variance=1.0)


class TestKl:
    @pytest.mark.parametrize(
        "mu,std,expected",
        [
            (0.0, 1.0, 0.0),
            (1.0, 1.0, 0.5),
            (0.0, 2.0, 0.806853),
        ],
    )
    def test_examples(self, mu, std, expected):
        q = MeanFieldGaussian(mu=[mu], log_std=[math.log(std)])
        assert kl_gaussian_diag(q, STD_NORMAL) == pytest.approx(expected, abs=1e-6)

    def test_sums_over_dimensions(self):
        q = MeanFieldGaussian(mu=[1.0, 1.0], log_std=[0.0, 0.0])
        assert kl_gaussian_diag(q, STD_NORMAL) == pytest.approx(1.0)

    def test_against_gaussian(self):
        q = MeanFieldGaussian(mu=[0.0], log_std=[0.0])
        assert kl_gaussian_diag(q, q) == pytest.approx(0.0)


def test_reparam_sample():
    q = MeanFieldGaussian(mu=[1.0, 0.0], log_std=[0.0, math.log(2.0)])
    np.testing.assert_allclose(reparam_sample(q, np.array([2.0, -1.0])), [3.0, -2.0])
    mass = PointMass([4.0])
    np.testing.assert_array_equal(reparam_sample(mass, np.array([9.0])), [4.0])


class TestElbo:
    def test_empty_batch_is_negative_kl(self, small_arch, obs, prior):
        q_w = MeanFieldGaussian.matching_prior(small_arch.num_params, prior)
        q_w = MeanFieldGaussian(mu=q_w.mu + 0.3, log_std=q_w.log_std)
        eps = np.random.default_rng(0).standard_normal((4, small_arch.num_params))
        value = elbo_bbb(q_w, small_arch, np.zeros((0, 1)), np.zeros((0, 1)), 10, obs, prior, eps)
        assert value == pytest.approx(-kl_gaussian_diag(q_w, prior))

    def test_identity_decoder_matches_weight_space(self, small_arch, sine_data, obs, prior):
        rng = np.random.default_rng(1)
        d_w = small_arch.num_params
        q = MeanFieldGaussian(mu=rng.normal(size=d_w), log_std=np.full(d_w, -1.0))
        eps = rng.standard_normal((3, d_w))
        ident = identity_decoder(small_arch)

        weight_space = elbo_bbb(q, small_arch, sine_data.x, sine_data.y, sine_data.n, obs, prior, eps)
        projected = elbo_projbnn(
            q,
            PointMass(ident.phi.values),
            ident.decoder_arch,
            small_arch,
            sine_data.x,
            sine_data.y,
            sine_data.n,
            obs,
            prior,
            eps,
        )
        assert projected == pytest.approx(weight_space)

    def test_variational_phi_needs_noise(self, small_arch, sine_data, obs, prior):
        ae = init_autoencoder(small_arch, 2, [], "rbf", np.random.default_rng(0))
        q_z = MeanFieldGaussian.matching_prior(2, prior)
        q_phi = MeanFieldGaussian.matching_prior(ae.decoder_arch.num_params, prior)
        with pytest.raises(ValueError):
            elbo_projbnn(
                q_z, q_phi, ae.decoder_arch, small_arch,
                sine_data.x, sine_data.y, sine_data.n, obs, prior, np.zeros((2, 2)),
            )


class TestFitVariational:
    def test_constant_validation_stops_after_patience(self, fast_vi_config):
        """No improvement over the initial value: stop at the first check."""
        cfg = dataclasses.replace(fast_vi_config, early_stop_patience=1)
        init = np.zeros(3)
        result = fit_variational(
            init, lambda params, it: (0.0, np.ones_like(params)), lambda params: -1.0, cfg
        )
        assert result.trace.stopped_early
        assert len(result.trace.elbo) == cfg.check_every
        assert result.trace.best_iteration == 0
        np.testing.assert_array_equal(result.params, init)

    def test_keeps_best_iterate(self, fast_vi_config):
        """Validation rewards moving right; gradient ascent goes right."""
        result = fit_variational(
            np.zeros(1),
            lambda params, it: (0.0, np.ones_like(params)),
            lambda params: float(params[0]),
            fast_vi_config,
        )
        assert not result.trace.stopped_early
        assert result.trace.best_iteration == fast_vi_config.max_iterations
        assert result.params[0] > 0
        assert len(result.trace.checks) == 1 + 40 // 10


class TestTraining:
    def test_bbb(self, small_arch, sine_data, obs, prior, fast_vi_config):
        model = train_bbb(sine_data, sine_data, small_arch, obs, prior, fast_vi_config)
        assert model.method is Method.BBB
        assert not model.is_projected
        assert model.q_w.size == small_arch.num_params
        draws = model.sample_weights(np.random.default_rng(0), 6)
        assert draws.shape == (6, small_arch.num_params)

    def test_projbnn_is_deterministic(self, small_arch, sine_data, obs, prior, fast_vi_config):
        ae = init_autoencoder(small_arch, 2, [3], "rbf", np.random.default_rng(2))
        a = train_projbnn(ae, sine_data, sine_data, obs, prior, fast_vi_config)
        b = train_projbnn(ae, sine_data, sine_data, obs, prior, fast_vi_config)
        assert a.is_projected
        np.testing.assert_array_equal(a.q_z.mu, b.q_z.mu)
        np.testing.assert_array_equal(a.q_phi.mu, b.q_phi.mu)
        assert a.kl(prior) > 0

    def test_qz_only_keeps_point_mass(self, small_arch, sine_data, obs, prior, fast_vi_config):
        ae = init_autoencoder(small_arch, 2, [3], "rbf", np.random.default_rng(2))
        model = train_ablation(
            "qz_only", sine_data, sine_data, obs, prior, fast_vi_config,
            target_arch=small_arch, ae=ae,
        )
        assert model.method is Method.QZ_ONLY
        assert isinstance(model.q_phi, PointMass)
        np.testing.assert_array_equal(model.q_phi.values, ae.phi.values)

    def test_linear_has_no_hidden_layer(self, small_arch, sine_data, obs, prior, fast_vi_config):
        rng = np.random.default_rng(3)
        snapshots = SnapshotSet(
            rng.normal(size=(8, small_arch.num_params)), np.ones(8), small_arch.fingerprint
        )
        pcae_cfg = PcaeConfig(latent_dim=2, hidden=[5], iterations=5, batch_over_snapshots=4)
        model = train_ablation(
            "linear", sine_data, sine_data, obs, prior, fast_vi_config,
            target_arch=small_arch, pcae_cfg=pcae_cfg, snapshots=snapshots,
        )
        assert model.method is Method.LINEAR
        assert model.decoder_arch.layer_sizes == (2, small_arch.num_params)

    def test_one_stage_uses_random_decoder(self, small_arch, sine_data, obs, prior, fast_vi_config):
        pcae_cfg = PcaeConfig(latent_dim=3, hidden=[4])
        model = train_ablation(
            "one_stage", sine_data, sine_data, obs, prior, fast_vi_config,
            target_arch=small_arch, pcae_cfg=pcae_cfg,
        )
        assert model.method is Method.ONE_STAGE
        assert model.decoder_arch.layer_sizes == (3, 4, small_arch.num_params)

    def test_ablation_requirements(self, small_arch, sine_data, obs, prior, fast_vi_config):
        with pytest.raises(ValueError):
            train_ablation(
                "qz_only", sine_data, sine_data, obs, prior, fast_vi_config,
                target_arch=small_arch,
            )
        with pytest.raises(ValueError):
            train_ablation(
                "bbb", sine_data, sine_data, obs, prior, fast_vi_config,
                target_arch=small_arch,
            )


def _central_differences(loss, params, h=1e-5):
    grad = np.zeros_like(params)
    for i in range(params.size):
        step = np.zeros_like(params)
        step[i] = h
        grad[i] = (loss(params + step) - loss(params - step)) / (2 * h)
    return grad


class TestKlProperties:
    @given(
        st.lists(
            st.tuples(st.floats(-10.0, 10.0), st.floats(-5.0, 3.0)), min_size=1, max_size=6
        ),
        st.floats(-3.0, 3.0),
        st.floats(1e-3, 10.0),
    )
    def test_non_negative(self, pairs, prior_mean, prior_variance):
        mu, log_std = (np.array(column) for column in zip(*pairs))
        q = MeanFieldGaussian(mu=mu, log_std=log_std)
        assert kl_gaussian_diag(q, PriorSpec(prior_mean, prior_variance)) >= -1e-12

    @given(st.integers(1, 8), st.floats(-3.0, 3.0), st.floats(1e-3, 10.0))
    def test_zero_at_prior(self, size, prior_mean, prior_variance):
        prior = PriorSpec(prior_mean, prior_variance)
        q = MeanFieldGaussian.matching_prior(size, prior)
        assert abs(kl_gaussian_diag(q, prior)) < 1e-12
        shifted = MeanFieldGaussian(mu=q.mu + 0.1, log_std=q.log_std)
        assert kl_gaussian_diag(shifted, prior) > 0

    def test_matches_monte_carlo(self):
        """Closed form within 4 standard errors of E_q[log q - log p], 20 pairs."""
        rng = np.random.default_rng(7)
        n_draws = 100_000
        for _ in range(20):
            q = MeanFieldGaussian(mu=rng.normal(size=3), log_std=rng.uniform(-1.0, 1.0, 3))
            p = MeanFieldGaussian(mu=rng.normal(size=3), log_std=rng.uniform(-1.0, 1.0, 3))
            draws = q.sample(rng.standard_normal((n_draws, 3)))
            log_ratio = np.sum(
                norm.logpdf(draws, q.mu, q.std) - norm.logpdf(draws, p.mu, p.std), axis=1
            )
            se = log_ratio.std(ddof=1) / math.sqrt(n_draws)
            assert abs(log_ratio.mean() - kl_gaussian_diag(q, p)) <= 4 * se


class TestElboGradient:
    def test_projected_matches_finite_differences(self, obs, prior):
        target = Architecture((1, 2, 1), Activation.TANH)
        ae = init_autoencoder(target, 2, [3], "tanh", np.random.default_rng(4), init_std=0.5)
        objective = ProjectedObjective(ae.decoder_arch, target, obs, prior)
        rng = np.random.default_rng(5)
        q_z = MeanFieldGaussian(mu=rng.normal(size=2), log_std=np.full(2, -1.0))
        q_phi = MeanFieldGaussian(
            mu=ae.phi.values, log_std=rng.normal(-2.0, 0.1, objective.phi_dim)
        )
        flat = objective.pack(q_z, q_phi)
        x = rng.uniform(-2.0, 2.0, size=(6, 1))
        y = np.sin(x)
        eps = objective.draw_eps(rng, 3)

        def elbo(params):
            return objective.elbo(params, x, y, 6, *eps)

        exact = grad(elbo)(flat)
        numeric = _central_differences(lambda p: float(elbo(p)), flat)
        assert target.num_params <= 10
        assert np.linalg.norm(exact - numeric) / np.linalg.norm(exact) < 1e-4


@pytest.fixture
def conjugate_data():
    """y = 0.7 x + N(0, 0.1^2) on 20 points."""
    rng = np.random.default_rng(21)
    x = rng.uniform(-1.0, 1.0, size=20)
    return Dataset(x=x, y=0.7 * x + rng.normal(0.0, 0.1, size=20), name="conjugate")


def _analytic_posterior(data, obs, prior):
    x, y = data.x[:, 0], data.y[:, 0]
    precision = 1.0 / prior.variance + x @ x / obs.sigma_y**2
    mean = (prior.mean / prior.variance + x @ y / obs.sigma_y**2) / precision
    return mean, 1.0 / math.sqrt(precision)


def _log_evidence(data, obs, prior):
    x, y = data.x[:, 0], data.y[:, 0]
    cov = obs.sigma_y**2 * np.eye(data.n) + prior.variance * np.outer(x, x)
    return multivariate_normal.logpdf(y, mean=prior.mean * x, cov=cov)


class TestConjugateOracle:
    """1-D Bayesian linear regression: mean-field Gaussian VI is exact."""

    @pytest.fixture
    def cfg(self):
        return VarInferenceConfig(
            mc_samples=20,
            lr=0.01,
            max_iterations=3000,
            check_every=3000,
            early_stop_patience=1,
            eval_samples=20,
            batch_size=20,
            seed=8,
        )

    @pytest.fixture(params=["bbb", "identity"])
    def posterior(self, request, linear_arch, conjugate_data, obs, prior, cfg):
        if request.param == "bbb":
            model = train_bbb(conjugate_data, conjugate_data, linear_arch, obs, prior, cfg)
            return model.q_w
        model = train_projbnn(
            identity_decoder(linear_arch),
            conjugate_data,
            conjugate_data,
            obs,
            prior,
            cfg,
            freeze_phi=True,
        )
        return model.q_z

    def test_recovers_posterior(self, posterior, conjugate_data, obs, prior):
        mean, std = _analytic_posterior(conjugate_data, obs, prior)
        assert posterior.mu[0] == pytest.approx(mean, abs=0.05)
        assert posterior.std[0] == pytest.approx(std, rel=0.2)

    def test_elbo_bounds_log_evidence(self, posterior, linear_arch, conjugate_data, obs, prior):
        objective = WeightSpaceObjective(linear_arch, obs, prior)
        eps = np.random.default_rng(9).standard_normal((1000, 1))
        per_draw = objective.per_sample_loglik(
            objective.pack(posterior), conjugate_data.x, conjugate_data.y, eps
        ) - kl_gaussian_diag(posterior, prior)
        se = per_draw.std(ddof=1) / math.sqrt(per_draw.size)
        log_evidence = _log_evidence(conjugate_data, obs, prior)
        assert per_draw.mean() <= log_evidence + 3 * se
        assert per_draw.mean() > log_evidence - 0.5


def test_identity_decoder_reproduces_bbb_trajectory(
    small_arch, sine_data, obs, prior, fast_vi_config
):
    """Shared seeds: every ELBO value and validation check coincide."""
    bbb = train_bbb(sine_data, sine_data, small_arch, obs, prior, fast_vi_config)
    projected = train_projbnn(
        identity_decoder(small_arch),
        sine_data,
        sine_data,
        obs,
        prior,
        fast_vi_config,
        freeze_phi=True,
    )
    bbb_elbo = np.array([value for _, value in bbb.trace.elbo])
    projected_elbo = np.array([value for _, value in projected.trace.elbo])

    assert len(bbb_elbo) == fast_vi_config.max_iterations
    np.testing.assert_allclose(projected_elbo, bbb_elbo, rtol=1e-9)
    np.testing.assert_allclose(
        [v for _, v in projected.trace.checks], [v for _, v in bbb.trace.checks], rtol=1e-9
    )
    np.testing.assert_allclose(projected.q_z.mu, bbb.q_w.mu, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(projected.q_z.log_std, bbb.q_w.log_std, rtol=1e-9, atol=1e-12)
