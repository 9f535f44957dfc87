"""Tests for dataset CSV reading and writing."""

import numpy as np
import pytest

from src.core.errors import ArtifactError, DataValidationError
from src.data.dataset import Dataset
from src.data.generators import gen_sine_tasks
from src.data.io import load_csv, load_task_set, write_csv, write_task_set


def test_load_orders_columns(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("y_0,x_1,x_0\n5,2,1\n6,4,3\n", encoding="utf-8")
    data = load_csv(path)
    np.testing.assert_array_equal(data.x, [[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(data.y, [[5.0], [6.0]])
    assert data.name == "data"


def test_write_then_load_keeps_values(tmp_path):
    rng = np.random.default_rng(0)
    data = Dataset(x=rng.normal(size=(7, 2)), y=rng.normal(size=(7, 1)))
    loaded = load_csv(write_csv(data, tmp_path / "nested" / "d.csv"))
    np.testing.assert_array_equal(loaded.x, data.x)
    np.testing.assert_array_equal(loaded.y, data.y)


def test_roundtrip_is_bit_exact_for_awkward_floats(tmp_path):
    awkward = np.array([0.1 + 0.2, 1.0 / 3.0, 2.0**-1074, 1.7976931348623157e308, -0.0])
    data = Dataset(x=awkward[:, None], y=np.nextafter(awkward, 1.0)[:, None])
    loaded = load_csv(write_csv(data, tmp_path / "awkward.csv"))
    assert loaded.x.tobytes() == data.x.tobytes()
    assert loaded.y.tobytes() == data.y.tobytes()


@pytest.mark.parametrize("cell", ["nan", "abc", "", "inf"])
def test_bad_cell_reports_position(tmp_path, cell):
    path = tmp_path / "bad.csv"
    path.write_text(f"x_0,y_0\n1,2\n{cell},3\n", encoding="utf-8")
    with pytest.raises(DataValidationError) as info:
        load_csv(path)
    assert info.value.row == 2
    assert info.value.column == "x_0"


def test_missing_header(tmp_path):
    path = tmp_path / "nohead.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(DataValidationError, match="missing header"):
        load_csv(path)


def test_missing_file(tmp_path):
    with pytest.raises(ArtifactError):
        load_csv(tmp_path / "absent.csv")


def test_task_set_roundtrip(tmp_path):
    tasks = gen_sine_tasks(n_tasks=3, n_per_task=5, seed=2)
    csv_path, manifest_path = write_task_set(tasks, tmp_path / "sine.csv")
    assert manifest_path.exists()

    loaded = load_task_set(csv_path)
    assert len(loaded) == 3
    assert loaded.target_arch.fingerprint == tasks.target_arch.fingerprint
    for original, restored in zip(tasks.tasks, loaded.tasks):
        np.testing.assert_array_equal(original.x, restored.x)
        np.testing.assert_array_equal(original.y, restored.y)
    assert loaded.specs[1].phase == pytest.approx(tasks.specs[1].phase)


def test_task_set_needs_manifest(tmp_path):
    path = tmp_path / "sine.csv"
    path.write_text("task,x_0,y_0\n0,1,2\n", encoding="utf-8")
    with pytest.raises(ArtifactError):
        load_task_set(path)
