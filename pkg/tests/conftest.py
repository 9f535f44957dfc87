"""
Test configuration and fixtures.
"""

import dataclasses

import numpy as np
import pytest

from src.core.models import ObservationModel, PriorSpec
from src.core.network import Activation, Architecture
from src.data.dataset import Dataset
from src.utils.config import (
    EvalConfig,
    FgeConfig,
    GridConfig,
    MetaConfig,
    PcaeConfig,
    RunConfig,
    VarInferenceConfig,
)


@pytest.fixture
def obs():
    return ObservationModel(sigma_y=0.1)


@pytest.fixture
def prior():
    return PriorSpec(mean=0.0, variance=0.1)


@pytest.fixture
def linear_arch():
    """y = w * x: one weight, no bias, no hidden layer."""
    return Architecture((1, 1), Activation.RELU, use_bias=False)


@pytest.fixture
def small_arch():
    return Architecture((1, 4, 1), Activation.TANH)


@pytest.fixture
def sine_data():
    """60 noisy points of sin(x) on [-3, 3]."""
    rng = np.random.default_rng(0)
    x = rng.uniform(-3.0, 3.0, size=60)
    y = np.sin(x) + rng.normal(0.0, 0.1, size=60)
    return Dataset(x=x, y=y, name="sine-fixture")


@pytest.fixture
def fast_vi_config():
    """VI settings small enough for unit tests."""
    return VarInferenceConfig(
        mc_samples=3,
        lr=0.01,
        max_iterations=40,
        early_stop_patience=5,
        check_every=10,
        eval_samples=5,
        batch_size=32,
        seed=3,
    )


@pytest.fixture
def tiny_config(tmp_path):
    """A full run configuration with desk-scale budgets."""
    return RunConfig(
        method="projbnn",
        seed=11,
        fge=FgeConfig(
            map_lr=0.01,
            map_iterations=30,
            snapshots=6,
            keep_top_k=4,
            cycle_epochs=1,
            batch_size=32,
        ),
        pcae=PcaeConfig(latent_dim=2, hidden=[4], iterations=10, batch_over_snapshots=4),
        vi=VarInferenceConfig(
            mc_samples=2,
            max_iterations=20,
            check_every=10,
            early_stop_patience=2,
            eval_samples=4,
            batch_size=32,
        ),
        meta=MetaConfig(
            n_tasks=2,
            points_per_task=12,
            valid_fraction=0.2,
            latent_dim=2,
            decoder_hidden=[4],
            target_hidden=[4],
            grid_n=2,
            phi_draws=3,
            x_grid_points=10,
        ),
        grid=GridConfig(latent_dims=[2], learning_rates=[0.01], hidden_layouts=[[4]]),
        eval=EvalConfig(samples=8, band_points=25),
        general=dataclasses.replace(
            RunConfig().general, output_directory=str(tmp_path / "out")
        ),
    )


@pytest.fixture
def test_output_dir(tmp_path):
    """Temporary output directory for tests."""
    output_dir = tmp_path / "output"
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir
