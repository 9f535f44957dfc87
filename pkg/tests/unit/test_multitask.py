"""Tests for the multitask model with a shared decoder."""

import numpy as np
import pytest

from src.core.errors import ConfigError, ShapeMismatchError
from src.core.models import MeanFieldGaussian, Method
from src.core.multitask import (
    elbo_meta,
    latent_grid_decode,
    phi_draws_for_fixed_z,
    split_tasks,
    task_rmse,
    train_meta,
    train_shared_bbb,
)
from src.core.network import Activation, Architecture
from src.core.projector import init_autoencoder
from src.core.vi import elbo_projbnn
from src.data.generators import gen_sine_tasks
from src.utils.config import MetaConfig

TARGET = Architecture((1, 3, 1), Activation.TANH)


@pytest.fixture
def ae():
    return init_autoencoder(TARGET, 2, [4], "tanh", np.random.default_rng(0))


@pytest.fixture
def tasks():
    return gen_sine_tasks(n_tasks=2, n_per_task=15, seed=0, target_arch=TARGET)


def _q(size, rng, scale=-2.0):
    return MeanFieldGaussian(mu=rng.normal(size=size), log_std=np.full(size, scale))


class TestElbo:
    def test_single_task_matches_projected_elbo(self, ae, sine_data, obs, prior):
        rng = np.random.default_rng(1)
        q_z = _q(2, rng)
        q_phi = _q(ae.decoder_arch.num_params, rng, scale=-5.0)
        eps_z = rng.standard_normal((3, 2))
        eps_phi = rng.standard_normal((3, ae.decoder_arch.num_params))

        single = elbo_projbnn(
            q_z, q_phi, ae.decoder_arch, TARGET,
            sine_data.x, sine_data.y, sine_data.n, obs, prior, eps_z, eps_phi,
        )
        meta = elbo_meta(
            [q_z], q_phi, ae.decoder_arch, TARGET,
            [(sine_data.x, sine_data.y, sine_data.n)], obs, prior, [eps_z], eps_phi,
        )
        assert meta == pytest.approx(single)

    def test_task_count_mismatch(self, ae, sine_data, obs, prior):
        rng = np.random.default_rng(1)
        q_phi = _q(ae.decoder_arch.num_params, rng)
        with pytest.raises(ShapeMismatchError):
            elbo_meta(
                [_q(2, rng), _q(2, rng)], q_phi, ae.decoder_arch, TARGET,
                [(sine_data.x, sine_data.y, sine_data.n)], obs, prior,
                [np.zeros((1, 2))], np.zeros((1, q_phi.size)),
            )


class TestSplitTasks:
    def test_sizes(self, tasks):
        splits = split_tasks(tasks, 0.2, seed=0)
        assert len(splits) == 2
        assert [(s.train.n, s.valid.n, s.test.n) for s in splits] == [(9, 3, 3)] * 2

    def test_small_task_keeps_training_points(self):
        tasks = gen_sine_tasks(n_tasks=1, n_per_task=3, seed=0)
        (part,) = split_tasks(tasks, 0.5, seed=0)
        assert (part.train.n, part.valid.n, part.test.n) == (1, 1, 1)

    def test_rejects_tiny_task(self):
        tasks = gen_sine_tasks(n_tasks=1, n_per_task=2, seed=0)
        with pytest.raises(ValueError):
            split_tasks(tasks, 0.2, seed=0)


class TestLatentGrid:
    def test_shape(self, ae):
        grid = latent_grid_decode(ae.phi.values, ae.decoder_arch, TARGET, 3, np.linspace(-4, 4, 7))
        assert grid.z.shape == (9, 2)
        assert grid.curves.shape == (9, 7)
        assert grid.x.shape == (7,)

    @pytest.mark.parametrize("grid_n", [1, 0, -3])
    def test_grid_needs_two_cells_per_axis(self, ae, grid_n):
        with pytest.raises(ConfigError):
            latent_grid_decode(ae.phi.values, ae.decoder_arch, TARGET, grid_n, np.zeros(2))

    def test_two_cells_are_symmetric_quartiles(self, ae):
        grid = latent_grid_decode(ae.phi.values, ae.decoder_arch, TARGET, 2, np.zeros(2))
        q = 0.6744897501960817
        np.testing.assert_allclose(grid.z, [[-q, -q], [-q, q], [q, -q], [q, q]], rtol=1e-9)

    def test_needs_two_latent_dims(self):
        ae3 = init_autoencoder(TARGET, 3, [4], "tanh", np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            latent_grid_decode(ae3.phi.values, ae3.decoder_arch, TARGET, 2, np.zeros(2))

    def test_phi_draws(self, ae):
        q_phi = MeanFieldGaussian(mu=ae.phi.values, log_std=np.full(len(ae.phi), -30.0))
        curves = phi_draws_for_fixed_z(
            q_phi, ae.decoder_arch, TARGET, np.zeros(2), 4,
            np.linspace(-1, 1, 5), np.random.default_rng(0),
        )
        assert curves.shape == (4, 5)
        np.testing.assert_allclose(curves, np.tile(curves[0], (4, 1)), atol=1e-9)


def test_train_meta_and_baseline(tasks, obs, prior, fast_vi_config):
    splits = split_tasks(tasks, 0.2, seed=0)
    meta_cfg = MetaConfig(n_tasks=2, latent_dim=2, decoder_hidden=[4])
    model = train_meta(splits, TARGET, obs, prior, meta_cfg, fast_vi_config)
    assert model.n_tasks == 2
    assert model.method is Method.META
    task_model = model.task_model(1)
    assert task_model.is_projected
    assert task_model.sample_weights(np.random.default_rng(0), 3).shape == (3, TARGET.num_params)

    baseline = train_shared_bbb(splits, TARGET, obs, prior, fast_vi_config)
    errors = task_rmse(
        [model.task_model(m) for m in range(2)],
        [s.test for s in splits],
        5,
        np.random.default_rng(0),
    )
    assert baseline.method is Method.BBB
    assert len(errors) == 2 and all(e >= 0 for e in errors)
