"""
Unit tests for evaluation metrics.
"""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from src.core.errors import FingerprintMismatchError, NonFiniteError, ShapeMismatchError
from src.core.metrics import (
    EnsembleModel,
    EvaluationReport,
    bands_from_samples,
    evaluate,
    marginal_log_likelihood,
    marginal_test_ll,
    mode_coverage,
    padded_range,
    region_mean_std,
    rmse,
)
from src.core.models import ObservationModel, SnapshotSet
from src.core.network import Architecture


def _ensemble(arch, rows):
    matrix = np.asarray(rows, dtype=float)
    snapshots = SnapshotSet(matrix, np.zeros(len(matrix)), arch.fingerprint)
    return EnsembleModel(snapshots=snapshots, target_arch=arch)


class TestRmse:
    def test_example(self):
        assert rmse(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(3.535534, abs=1e-6)

    def test_duplication_invariance(self):
        rng = np.random.default_rng(0)
        pred, target = rng.normal(size=7), rng.normal(size=7)
        doubled = rmse(np.tile(pred, 2), np.tile(target, 2))
        assert doubled == pytest.approx(rmse(pred, target))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            rmse(np.zeros(3), np.zeros(4))


class TestMarginalLogLikelihood:
    def test_identical_samples(self):
        loglik = np.tile(np.array([-1.0, -3.0]), (5, 1))
        assert marginal_log_likelihood(loglik) == pytest.approx(-2.0)

    def test_mixture_of_two_samples(self):
        loglik = np.log(np.array([[0.2], [0.4]]))
        assert marginal_log_likelihood(loglik) == pytest.approx(math.log(0.3))

    def test_names_non_finite_sample(self):
        loglik = np.zeros((3, 2))
        loglik[1, 0] = np.nan
        with pytest.raises(NonFiniteError) as info:
            marginal_log_likelihood(loglik)
        assert info.value.sample_index == 1

    def test_point_estimate(self, linear_arch, obs):
        """A zero network on a zero target scores log N(0 | 0, 0.1^2)."""
        model = _ensemble(linear_arch, [[0.0]])
        value = marginal_test_ll(
            model, np.ones((4, 1)), np.zeros((4, 1)), obs, 3, np.random.default_rng(0)
        )
        assert value == pytest.approx(1.383647, abs=1e-6)

    def test_rejects_zero_samples(self, linear_arch, obs):
        model = _ensemble(linear_arch, [[0.0]])
        with pytest.raises(ValueError):
            marginal_test_ll(model, np.ones((1, 1)), np.ones((1, 1)), obs, 0, None)


class TestBands:
    def test_midpoint_quantile(self, obs):
        samples = np.array([[-1.0], [1.0]])
        bands = bands_from_samples(np.zeros(1), samples, [0.5], obs)
        assert bands.f_quantiles[0, 0] == pytest.approx(0.0)
        assert bands.mean[0] == pytest.approx(0.0)
        assert bands.total_std[0] == pytest.approx(math.sqrt(1.01))

    def test_total_std_at_least_noise(self, obs):
        samples = np.full((10, 5), 2.0)
        bands = bands_from_samples(np.arange(5.0), samples, [0.025, 0.975], obs)
        np.testing.assert_allclose(bands.total_std, obs.sigma_y)
        assert np.all(bands.y_quantiles[0] < bands.y_quantiles[1])

    def test_columns_and_region(self, obs):
        rng = np.random.default_rng(0)
        bands = bands_from_samples(
            np.linspace(-2, 2, 9), rng.normal(size=(20, 9)), [0.975, 0.025], obs
        )
        columns = bands.to_columns()
        assert {"x", "mean", "q_low", "q_high", "total_std"} <= set(columns)
        assert np.all(columns["q_low"] <= columns["q_high"])
        assert region_mean_std(bands, -0.5, 0.5) > 0
        with pytest.raises(ValueError):
            region_mean_std(bands, 10, 11)


class TestModeCoverage:
    modes = [
        SimpleNamespace(point_indices=np.array([0, 1])),
        SimpleNamespace(point_indices=np.array([2, 3])),
    ]

    def test_empty_predictions(self):
        assert mode_coverage(np.zeros((0, 4)), np.zeros(4), self.modes, 0.1) == 0

    def test_exact_fit_covers_everything(self):
        y = np.array([1.0, 1.0, -1.0, -1.0])
        assert mode_coverage(y[None, :], y, self.modes, 0.1) == 2

    def test_one_sample_per_mode(self):
        y = np.array([1.0, 1.0, -1.0, -1.0])
        preds = np.array([[1.0, 1.0, 5.0, 5.0], [0.0, 0.0, -1.05, -0.95]])
        assert mode_coverage(preds[..., None], y, self.modes, 0.1) == 2

    def test_threshold(self):
        y = np.zeros(4)
        preds = np.full((1, 4), 0.35)
        assert mode_coverage(preds, y, self.modes, 0.1, threshold_sigmas=3.0) == 0
        assert mode_coverage(preds, y, self.modes, 0.1, threshold_sigmas=4.0) == 2


class TestEnsembleModel:
    def test_cycles_through_snapshots(self, linear_arch):
        model = _ensemble(linear_arch, [[1.0], [2.0]])
        draws = model.sample_weights(np.random.default_rng(0), 5)
        np.testing.assert_array_equal(draws[:, 0], [1.0, 2.0, 1.0, 2.0, 1.0])

    def test_fingerprint_checked(self, linear_arch):
        other = Architecture((1, 2, 1))
        snapshots = SnapshotSet(np.zeros((1, 1)), [0.0], other.fingerprint)
        with pytest.raises(FingerprintMismatchError):
            EnsembleModel(snapshots=snapshots, target_arch=linear_arch)

    def test_evaluate(self, linear_arch):
        model = _ensemble(linear_arch, [[1.0]])
        x = np.linspace(-1, 1, 6)[:, None]
        report, loglik = evaluate(
            model, x, x.copy(), ObservationModel(0.1), 4, np.random.default_rng(0)
        )
        assert isinstance(report, EvaluationReport)
        assert loglik.shape == (4, 6)
        assert report.test_rmse == pytest.approx(0.0)
        assert report.test_ll == pytest.approx(1.383647, abs=1e-6)
        assert report.to_dict()["method"] == "fge"
        assert "mode_coverage" not in report.to_dict()


def test_padded_range():
    assert padded_range(np.array([0.0, 4.0])) == (-1.0, 5.0)
