"""
Paired comparisons between methods on the synthetic benchmarks.

Each test fixes one seed and compares two methods (or two settings of one
method) on identical data. Budgets are well above the smoke-test fixtures,
so these are the slowest tests in the suite.
"""

import dataclasses

import numpy as np
import pytest

from src.core.ensemble import run_fge
from src.core.models import ObservationModel, PriorSpec
from src.core.pipeline import ProjBNNPipeline
from src.core.projector import train_pcae
from src.data.dataset import normalize
from src.data.sources import get_source
from src.utils.config import (
    FgeConfig,
    GridConfig,
    MetaConfig,
    PcaeConfig,
    VarInferenceConfig,
)

pytestmark = [pytest.mark.integration, pytest.mark.slow]


@pytest.fixture
def experiment_config(tiny_config):
    """Budgets large enough for the methods to separate."""
    return dataclasses.replace(
        tiny_config,
        fge=FgeConfig(
            map_lr=0.01,
            map_iterations=1000,
            snapshots=40,
            keep_top_k=20,
            cycle_epochs=10,
            batch_size=64,
            fit_mode_subsets=True,
            seed=1,
        ),
        pcae=PcaeConfig(latent_dim=2, hidden=[20], iterations=1500, batch_over_snapshots=16),
        vi=VarInferenceConfig(
            mc_samples=5,
            lr=0.01,
            max_iterations=2000,
            check_every=100,
            early_stop_patience=5,
            eval_samples=50,
            batch_size=64,
            seed=2,
        ),
        grid=GridConfig(latent_dims=[2], learning_rates=[0.01], hidden_layouts=[[20]]),
        eval=dataclasses.replace(tiny_config.eval, samples=100, band_points=100),
    )


def _on(config, source, n_points, **changes):
    data = dataclasses.replace(config.data, source=source, n_points=n_points)
    return dataclasses.replace(config, data=data, **changes)


def test_projbnn_covers_more_modes_than_bbb(experiment_config, tmp_path):
    config = _on(experiment_config, "four-modes", 200)
    projbnn = ProjBNNPipeline(config, tmp_path / "projbnn").run()
    bbb = ProjBNNPipeline(dataclasses.replace(config, method="bbb"), tmp_path / "bbb").run()

    assert projbnn.ok, projbnn.failure
    assert bbb.ok, bbb.failure
    assert projbnn.metrics["mode_coverage"] > bbb.metrics["mode_coverage"]


def test_projbnn_widens_in_the_gap(experiment_config, tmp_path):
    result = ProjBNNPipeline(_on(experiment_config, "toy-rbf", 200), tmp_path / "gap").run()

    assert result.ok, result.failure
    assert result.metrics["gap_std_ratio"] >= 1.5


def test_prediction_constraint_improves_decoded_fit():
    generated = get_source("toy-rbf").generate(seed=0)
    data, _ = normalize(generated.dataset)
    arch = generated.target_arch
    obs = ObservationModel(0.1)
    _, kept = run_fge(
        arch,
        data,
        data,
        obs,
        PriorSpec(0.0, 0.1),
        FgeConfig(map_iterations=1000, map_lr=0.01, snapshots=30, keep_top_k=20, seed=4),
    )

    def decoded_ll(beta: float) -> float:
        cfg = PcaeConfig(latent_dim=2, hidden=[20], beta=beta, iterations=1500, seed=5)
        return train_pcae(kept, data, obs, cfg, arch).report.decoded_train_ll

    assert decoded_ll(1.0) > decoded_ll(0.0)


def test_meta_beats_shared_bbb(experiment_config, tmp_path):
    meta = MetaConfig(
        n_tasks=6,
        points_per_task=30,
        latent_dim=2,
        decoder_hidden=[50],
        target_hidden=[20],
        grid_n=3,
        phi_draws=5,
        x_grid_points=50,
    )
    config = dataclasses.replace(experiment_config, method="meta", meta=meta)
    result = ProjBNNPipeline(config, tmp_path / "meta").run()

    assert result.ok, result.failure
    assert np.mean(result.metrics["task_rmse"]) < result.metrics["shared_bbb_rmse"]
