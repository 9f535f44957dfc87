"""
Synthetic dataset generators.

- gen_toy_latent_rbf: RBF network whose weights are a random linear image of
  a 2-D latent code; inputs drawn from two intervals around a gap
- gen_toy_four_modes: four narrow input clusters with their own levels;
  a 3-unit RBF network can fit any three of them but not all four
- gen_sine_tasks: y = a_m sin(x + b_m) family for multitask learning
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.network import Activation, Architecture, WeightVector, forward
from .dataset import Dataset

NOISE_STD = 0.1

TOY_RBF_ARCH = Architecture((1, 20, 1), Activation.RBF)
TOY_RBF_LATENT_DIM = 2
TOY_RBF_INTERVALS: Tuple[Tuple[float, float], ...] = ((-4.0, -1.0), (1.0, 4.0))
TOY_RBF_GAP = (-1.0, 1.0)

FOUR_MODE_ARCH = Architecture((1, 3, 1), Activation.RBF)
FOUR_MODE_CENTERS = (-3.0, -1.0, 1.0, 3.0)
FOUR_MODE_WIDTH = 0.15

SINE_ARCH = Architecture((1, 20, 1), Activation.TANH)
SINE_X_RANGE = (-4.0, 4.0)
SINE_AMPLITUDE_RANGE = (-3.0, 3.0)


@dataclass(frozen=True, eq=False)
class ToyRbfData:
    """Dataset plus the weights and latent code that generated it."""

    dataset: Dataset
    true_weights: WeightVector
    latent: np.ndarray
    gap: Tuple[float, float] = TOY_RBF_GAP


def gen_toy_latent_rbf(seed: int, n_points: int = 200) -> ToyRbfData:
    """
    Sample a [1, 20, 1] RBF network with w = A z, z ~ N(0, I_2), and observe
    it with N(0, 0.1^2) noise at inputs drawn from two intervals.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    rng = np.random.default_rng(seed)

    z = rng.normal(size=TOY_RBF_LATENT_DIM)
    projection = rng.normal(size=(TOY_RBF_ARCH.num_params, TOY_RBF_LATENT_DIM))
    weights = WeightVector.for_arch(TOY_RBF_ARCH, projection @ z)

    n_left = n_points // 2
    (l_lo, l_hi), (r_lo, r_hi) = TOY_RBF_INTERVALS
    x = np.concatenate(
        [
            rng.uniform(l_lo, l_hi, size=n_left),
            rng.uniform(r_lo, r_hi, size=n_points - n_left),
        ]
    )[:, None]
    f = forward(TOY_RBF_ARCH, weights.values, x)
    y = f + rng.normal(0.0, NOISE_STD, size=f.shape)

    return ToyRbfData(
        dataset=Dataset(x=x, y=y, name="toy-rbf"),
        true_weights=weights,
        latent=z,
    )


@dataclass(frozen=True, eq=False)
class ModeDescriptor:
    """One input cluster of the four-mode toy."""

    index: int
    center: float
    value: float
    width: float
    point_indices: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "center": self.center,
            "value": self.value,
            "width": self.width,
            "point_indices": self.point_indices.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModeDescriptor":
        return cls(
            index=int(data["index"]),
            center=float(data["center"]),
            value=float(data["value"]),
            width=float(data["width"]),
            point_indices=np.asarray(data["point_indices"], dtype=int),
        )


@dataclass(frozen=True, eq=False)
class FourModeData:
    dataset: Dataset
    modes: List[ModeDescriptor]

    def subsets_of_three(self) -> List[Dataset]:
        """The four datasets obtained by dropping one mode each."""
        subsets = []
        for dropped in self.modes:
            keep = np.concatenate(
                [m.point_indices for m in self.modes if m.index != dropped.index]
            )
            subsets.append(
                self.dataset.subset(np.sort(keep), f"four-modes:without-{dropped.index}")
            )
        return subsets


def gen_toy_four_modes(seed: int, points_per_mode: int = 20) -> FourModeData:
    """
    Four jittered clusters around x = -3, -1, 1, 3 with alternating-sign
    levels of magnitude in [1, 2].
    """
    if points_per_mode < 1:
        raise ValueError("points_per_mode must be >= 1")
    rng = np.random.default_rng(seed)

    xs, ys, modes = [], [], []
    for i, base in enumerate(FOUR_MODE_CENTERS):
        center = base + rng.uniform(-0.2, 0.2)
        value = (1.0 if i % 2 == 0 else -1.0) * rng.uniform(1.0, 2.0)
        x = rng.normal(center, FOUR_MODE_WIDTH, size=points_per_mode)
        y = value + rng.normal(0.0, NOISE_STD, size=points_per_mode)
        start = i * points_per_mode
        modes.append(
            ModeDescriptor(
                index=i,
                center=float(center),
                value=float(value),
                width=FOUR_MODE_WIDTH,
                point_indices=np.arange(start, start + points_per_mode),
            )
        )
        xs.append(x)
        ys.append(y)

    dataset = Dataset(
        x=np.concatenate(xs)[:, None], y=np.concatenate(ys)[:, None], name="four-modes"
    )
    return FourModeData(dataset=dataset, modes=modes)


@dataclass(frozen=True)
class SineTaskSpec:
    """Amplitude and phase of one sine task."""

    amplitude: float
    phase: float

    def to_dict(self) -> Dict[str, float]:
        return {"amplitude": self.amplitude, "phase": self.phase}


@dataclass(frozen=True, eq=False)
class TaskSet:
    """Tasks sharing one target architecture."""

    tasks: List[Dataset]
    target_arch: Architecture = SINE_ARCH
    specs: List[SineTaskSpec] = field(default_factory=list)

    def __post_init__(self):
        if len(self.tasks) < 1:
            raise ValueError("a task set needs at least one task")
        dims = {(t.x_dim, t.y_dim) for t in self.tasks}
        if len(dims) != 1:
            raise ValueError(f"tasks disagree on dimensions: {sorted(dims)}")
        x_dim, y_dim = dims.pop()
        if (x_dim, y_dim) != (self.target_arch.input_dim, self.target_arch.output_dim):
            raise ValueError("tasks do not match the target architecture")

    def __len__(self) -> int:
        return len(self.tasks)

    def pooled(self) -> Dataset:
        """All tasks stacked into one dataset (for the shared baseline)."""
        return Dataset(
            x=np.concatenate([t.x for t in self.tasks]),
            y=np.concatenate([t.y for t in self.tasks]),
            name="tasks:pooled",
        )


def sine_phase(m: int, n_tasks: int) -> float:
    """Phase of the m-th task (1-based), evenly spaced over [0, 2 pi]."""
    if n_tasks == 1:
        return 0.0
    return 2.0 * math.pi * (m - 1) / (n_tasks - 1)


def gen_sine_tasks(
    n_tasks: int,
    n_per_task: int,
    seed: int,
    target_arch: Optional[Architecture] = None,
) -> TaskSet:
    """y = a_m sin(x + b_m) + N(0, 0.1^2), a_m ~ U(-3, 3), x ~ U(-4, 4)."""
    if n_tasks < 1 or n_per_task < 1:
        raise ValueError("need at least one task with at least one point")
    rng = np.random.default_rng(seed)

    tasks, specs = [], []
    for m in range(1, n_tasks + 1):
        spec = SineTaskSpec(
            amplitude=float(rng.uniform(*SINE_AMPLITUDE_RANGE)),
            phase=sine_phase(m, n_tasks),
        )
        x = rng.uniform(*SINE_X_RANGE, size=n_per_task)
        y = spec.amplitude * np.sin(x + spec.phase) + rng.normal(
            0.0, NOISE_STD, size=n_per_task
        )
        tasks.append(Dataset(x=x[:, None], y=y[:, None], name=f"sine-{m}"))
        specs.append(spec)

    return TaskSet(tasks=tasks, target_arch=target_arch or SINE_ARCH, specs=specs)
