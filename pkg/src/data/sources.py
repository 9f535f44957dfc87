"""
Data sources for the pipeline and the ``gen-data`` command.

Every source yields a ``GeneratedData`` bundle: the dataset itself plus
whatever ground truth the generator knows (true weights, mode layout,
task specs) and the default target architecture for it.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Type

from ..core.network import Architecture
from .dataset import Dataset
from .generators import (
    FOUR_MODE_ARCH,
    TOY_RBF_ARCH,
    ModeDescriptor,
    TaskSet,
    gen_sine_tasks,
    gen_toy_four_modes,
    gen_toy_latent_rbf,
)
from .io import load_csv, load_task_set, write_csv, write_task_set


@dataclass(eq=False)
class GeneratedData:
    """A dataset and its known ground truth."""

    dataset: Dataset
    kind: str
    target_arch: Optional[Architecture] = None
    modes: List[ModeDescriptor] = field(default_factory=list)
    tasks: Optional[TaskSet] = None
    truth: Dict[str, Any] = field(default_factory=dict)

    def write(self, path: str | Path) -> List[Path]:
        """Write the CSV and, where applicable, its sidecar manifest."""
        path = Path(path)
        if self.tasks is not None:
            return list(write_task_set(self.tasks, path))

        written = [write_csv(self.dataset, path)]
        if self.modes or self.truth:
            sidecar = path.with_suffix(".truth.json")
            payload = {
                "kind": self.kind,
                "modes": [m.to_dict() for m in self.modes],
                **self.truth,
            }
            sidecar.write_text(json.dumps(payload, indent=2), encoding="utf-8")
            written.append(sidecar)
        return written


class DataSource(ABC):
    """Abstract base class for data sources."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Source identifier used in config and on the command line."""
        pass

    @property
    def description(self) -> str:
        return self.name

    @abstractmethod
    def generate(self, seed: int, n_points: Optional[int] = None) -> GeneratedData:
        """Produce the data for ``seed``."""
        pass


class ToyRbfSource(DataSource):
    """Latent-projected RBF network with a gap in the inputs."""

    @property
    def name(self) -> str:
        return "toy-rbf"

    @property
    def description(self) -> str:
        return "RBF network with weights w = A z, inputs around a gap"

    def generate(self, seed: int, n_points: Optional[int] = None) -> GeneratedData:
        toy = gen_toy_latent_rbf(seed, n_points or 200)
        return GeneratedData(
            dataset=toy.dataset,
            kind=self.name,
            target_arch=TOY_RBF_ARCH,
            truth={
                "true_weights": toy.true_weights.values.tolist(),
                "latent": toy.latent.tolist(),
                "gap": list(toy.gap),
            },
        )


class FourModesSource(DataSource):
    """Four clusters, fit three-at-a-time by a 3-unit RBF network."""

    @property
    def name(self) -> str:
        return "four-modes"

    @property
    def description(self) -> str:
        return "Four 1-D clusters for multimodal posteriors"

    def generate(self, seed: int, n_points: Optional[int] = None) -> GeneratedData:
        per_mode = max(1, (n_points or 80) // 4)
        toy = gen_toy_four_modes(seed, per_mode)
        return GeneratedData(
            dataset=toy.dataset,
            kind=self.name,
            target_arch=FOUR_MODE_ARCH,
            modes=toy.modes,
        )


class SineSource(DataSource):
    """Family of phase-shifted sine tasks."""

    def __init__(self, n_tasks: int = 8):
        self.n_tasks = n_tasks

    @property
    def name(self) -> str:
        return "sine"

    @property
    def description(self) -> str:
        return "y = a sin(x + b) tasks for multitask learning"

    def generate(self, seed: int, n_points: Optional[int] = None) -> GeneratedData:
        tasks = gen_sine_tasks(self.n_tasks, n_points or 40, seed)
        return GeneratedData(
            dataset=tasks.pooled(),
            kind=self.name,
            target_arch=tasks.target_arch,
            tasks=tasks,
        )


class CsvSource(DataSource):
    """User-supplied CSV (x_i / y_j header)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    @property
    def name(self) -> str:
        return "csv"

    def generate(self, seed: int, n_points: Optional[int] = None) -> GeneratedData:
        if self.path.with_suffix(".tasks.json").exists():
            tasks = load_task_set(self.path)
            return GeneratedData(
                dataset=tasks.pooled(),
                kind="sine",
                target_arch=tasks.target_arch,
                tasks=tasks,
            )
        dataset = load_csv(self.path)
        modes: List[ModeDescriptor] = []
        truth_path = self.path.with_suffix(".truth.json")
        if truth_path.exists():
            truth = json.loads(truth_path.read_text(encoding="utf-8"))
            modes = [ModeDescriptor.from_dict(m) for m in truth.get("modes", [])]
        return GeneratedData(dataset=dataset, kind=self.name, modes=modes)


# Source registry
SOURCES: Dict[str, Type[DataSource]] = {
    "toy-rbf": ToyRbfSource,
    "four-modes": FourModesSource,
    "sine": SineSource,
    "csv": CsvSource,
}


def get_source(name: str, **kwargs: Any) -> DataSource:
    """
    Get a data source by name.

    Args:
        name: Source name (toy-rbf, four-modes, sine, csv).
        **kwargs: Constructor arguments (``path`` for csv, ``n_tasks`` for sine).

    Raises:
        ValueError: If the source is not supported.

    Example:
        >>> data = get_source("toy-rbf").generate(seed=0)
    """
    source_class = SOURCES.get(name.lower())

    if source_class is None:
        available = ", ".join(SOURCES.keys())
        raise ValueError(f"Data source '{name}' is not supported. Available: {available}")

    return source_class(**kwargs)
