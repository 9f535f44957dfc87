"""Tests for datasets, normalization and splits."""

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from src.core.errors import DataValidationError, ShapeMismatchError
from src.data.dataset import (
    Dataset,
    NormStats,
    SplitKind,
    SplitSpec,
    denormalize,
    normalize,
    split,
)


def _line(n=100):
    x = np.arange(n, dtype=float)
    return Dataset(x=x, y=2 * x + 1, name="line")


class TestDataset:
    def test_promotes_vectors_to_columns(self):
        data = Dataset(x=[1.0, 2.0], y=[3.0, 4.0])
        assert data.x.shape == (2, 1)
        assert data.n == 2 and len(data) == 2

    def test_rejects_row_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            Dataset(x=np.zeros(3), y=np.zeros(4))

    def test_reports_non_finite_cell(self):
        with pytest.raises(DataValidationError) as info:
            Dataset(x=[0.0, np.inf], y=[0.0, 1.0])
        assert info.value.row == 1
        assert info.value.column == "x_0"


class TestNormalize:
    def test_example(self):
        data, stats = normalize(Dataset(x=[1.0, 3.0], y=[10.0, 20.0]))
        np.testing.assert_allclose(data.x[:, 0], [-1.0, 1.0])
        np.testing.assert_allclose(data.y[:, 0], [-1.0, 1.0])
        np.testing.assert_allclose(stats.x_mean, [2.0])
        np.testing.assert_allclose(stats.y_std, [5.0])

    def test_constant_column(self):
        with pytest.raises(DataValidationError) as info:
            normalize(Dataset(x=np.ones(5), y=np.arange(5.0)))
        assert info.value.column == "x_0"

    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        data = Dataset(x=rng.normal(3, 2, size=(30, 2)), y=rng.normal(-1, 4, size=30))
        normed, stats = normalize(data)
        restored = denormalize(normed, stats)
        np.testing.assert_allclose(restored.x, data.x)
        np.testing.assert_allclose(restored.y, data.y)
        np.testing.assert_allclose(normed.x.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(normed.y.std(axis=0), 1.0)

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30),
        st.floats(0.1, 100.0),
        st.floats(-100.0, 100.0),
    )
    def test_roundtrip_property(self, values, y_scale, y_shift):
        x = np.asarray(values)
        y = y_shift - y_scale * x
        assume(x.std() > 1e-6 and y.std() > 1e-6)
        data = Dataset(x=x, y=y)
        restored = denormalize(*normalize(data))
        np.testing.assert_allclose(restored.x, data.x, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max()))
        np.testing.assert_allclose(restored.y, data.y, rtol=0, atol=1e-12 * max(1.0, np.abs(y).max()))

    def test_stats_dict_roundtrip(self):
        _, stats = normalize(_line(10))
        restored = NormStats.from_dict(stats.to_dict())
        np.testing.assert_array_equal(restored.y_mean, stats.y_mean)
        np.testing.assert_allclose(restored.y_to_original([[0.0]]), [[stats.y_mean[0]]])


class TestSplit:
    def test_random_sizes(self):
        parts = split(_line(), SplitSpec(SplitKind.RANDOM, seed=1))
        assert (parts.train.n, parts.valid.n, parts.test.n) == (80, 10, 10)

    @pytest.mark.parametrize("kind", list(SplitKind))
    def test_partition(self, kind):
        parts = split(_line(), SplitSpec(kind, seed=3))
        indices = np.concatenate([parts.train_idx, parts.valid_idx, parts.test_idx])
        assert sorted(indices.tolist()) == list(range(100))
        np.testing.assert_array_equal(parts.train.x[:, 0], parts.train_idx)

    def test_deterministic(self):
        a = split(_line(), SplitSpec(seed=5))
        b = split(_line(), SplitSpec(seed=5))
        np.testing.assert_array_equal(a.test_idx, b.test_idx)

    def test_extrapolation_holds_out_norm_extremes(self):
        parts = split(_line(), SplitSpec(SplitKind.EXTRAPOLATION, seed=0))
        assert parts.test_idx.tolist() == [0, 1, 2, 3, 4, 95, 96, 97, 98, 99]
        assert (parts.train.n, parts.valid.n) == (80, 10)

    def test_interpolation_keeps_extremes_in_train(self):
        parts = split(_line(), SplitSpec(SplitKind.INTERPOLATION, seed=0))
        extremes = {0, 1, 2, 3, 4, 95, 96, 97, 98, 99}
        assert extremes <= set(parts.train_idx.tolist())
        assert not extremes & set(parts.test_idx.tolist())
        assert parts.test.n == 10

    def test_needs_twenty_rows(self):
        with pytest.raises(DataValidationError):
            split(_line(19), SplitSpec())

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SplitSpec(train=0.7, valid=0.1, test=0.1)

    def test_spec_dict_roundtrip(self):
        spec = SplitSpec(SplitKind.EXTRAPOLATION, seed=4)
        assert SplitSpec.from_dict(spec.to_dict()) == spec
