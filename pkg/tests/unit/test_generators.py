"""Tests for the synthetic data generators and sources."""

import math

import numpy as np
import pytest

from src.data.generators import (
    gen_sine_tasks,
    gen_toy_four_modes,
    gen_toy_latent_rbf,
    sine_phase,
)
from src.data.sources import get_source


class TestToyLatentRbf:
    def test_deterministic(self):
        a = gen_toy_latent_rbf(seed=4, n_points=50)
        b = gen_toy_latent_rbf(seed=4, n_points=50)
        np.testing.assert_array_equal(a.dataset.x, b.dataset.x)
        np.testing.assert_array_equal(a.dataset.y, b.dataset.y)
        np.testing.assert_array_equal(a.latent, b.latent)

    def test_inputs_avoid_gap(self):
        data = gen_toy_latent_rbf(seed=0, n_points=200)
        x = data.dataset.x[:, 0]
        assert data.dataset.n == 200
        assert np.all(np.abs(x) >= 1.0)
        assert np.all(np.abs(x) <= 4.0)

    def test_weights_match_architecture(self):
        data = gen_toy_latent_rbf(seed=1)
        assert len(data.true_weights.values) == 61
        assert data.latent.shape == (2,)


class TestFourModes:
    def test_modes_partition_rows(self):
        data = gen_toy_four_modes(seed=0, points_per_mode=10)
        assert len(data.modes) == 4
        indices = np.concatenate([m.point_indices for m in data.modes])
        assert sorted(indices.tolist()) == list(range(40))

    def test_levels_alternate_in_sign(self):
        data = gen_toy_four_modes(seed=2)
        signs = [math.copysign(1.0, m.value) for m in data.modes]
        assert signs == [1.0, -1.0, 1.0, -1.0]
        assert all(1.0 <= abs(m.value) <= 2.0 for m in data.modes)

    def test_subsets_of_three(self):
        data = gen_toy_four_modes(seed=0, points_per_mode=10)
        subsets = data.subsets_of_three()
        assert len(subsets) == 4
        assert all(s.n == 30 for s in subsets)


class TestSine:
    def test_phases_evenly_spaced(self):
        tasks = gen_sine_tasks(n_tasks=3, n_per_task=4, seed=0)
        phases = [s.phase for s in tasks.specs]
        assert phases == pytest.approx([0.0, math.pi, 2 * math.pi])

    def test_single_task_has_zero_phase(self):
        assert sine_phase(1, 1) == 0.0

    def test_amplitudes_in_range(self):
        tasks = gen_sine_tasks(n_tasks=20, n_per_task=2, seed=1)
        assert all(abs(s.amplitude) <= 3.0 for s in tasks.specs)

    def test_pooled(self):
        tasks = gen_sine_tasks(n_tasks=2, n_per_task=6, seed=0)
        assert tasks.pooled().n == 12

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            gen_sine_tasks(n_tasks=0, n_per_task=3, seed=0)


def test_get_source_unknown():
    with pytest.raises(ValueError, match="not supported"):
        get_source("mnist")


def test_generated_toy_writes_sidecar(tmp_path):
    generated = get_source("four-modes").generate(seed=0)
    written = generated.write(tmp_path / "modes.csv")
    assert written[0].exists()
    assert any(p.name.endswith(".truth.json") for p in written)
