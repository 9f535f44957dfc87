"""
First-order optimizers over flat parameter vectors.

The update rules are those of ``autograd.misc.optimizers.adam`` and of
``autograd.misc.optimizers.sgd`` with ``mass=0``. Those functions own the
whole loop at a fixed step size; these keep their state between calls so
training loops can interleave steps with minibatching, learning-rate
schedules, non-finite checks and early stopping.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Dict, Optional, Type

import numpy as np


class Optimizer(ABC):
    """Minimizes: ``step`` moves against the gradient."""

    def __init__(self, lr: float):
        if not lr > 0:
            raise ValueError(f"learning rate must be > 0, got {lr}")
        self.lr = lr
        self.t = 0

    @property
    @abstractmethod
    def name(self) -> str:
        """Optimizer identifier."""
        pass

    @abstractmethod
    def step(
        self, params: np.ndarray, grad: np.ndarray, lr: Optional[float] = None
    ) -> np.ndarray:
        """Return updated parameters; ``lr`` overrides the base rate."""
        pass


class SGD(Optimizer):
    """Plain gradient descent."""

    @property
    def name(self) -> str:
        return "sgd"

    def step(
        self, params: np.ndarray, grad: np.ndarray, lr: Optional[float] = None
    ) -> np.ndarray:
        self.t += 1
        return params - (self.lr if lr is None else lr) * grad


class Adam(Optimizer):
    """Adam with bias-corrected moment estimates."""

    def __init__(
        self,
        lr: float,
        b1: float = 0.9,
        b2: float = 0.999,
        eps: float = 1e-8,
    ):
        super().__init__(lr)
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None

    @property
    def name(self) -> str:
        return "adam"

    def step(
        self, params: np.ndarray, grad: np.ndarray, lr: Optional[float] = None
    ) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = (1 - self.b1) * grad + self.b1 * self.m
        self.v = (1 - self.b2) * grad**2 + self.b2 * self.v
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        rate = self.lr if lr is None else lr
        return params - rate * mhat / (np.sqrt(vhat) + self.eps)


OPTIMIZERS: Dict[str, Type[Optimizer]] = {
    "sgd": SGD,
    "adam": Adam,
}


def make_optimizer(name: str, lr: float) -> Optimizer:
    """
    Get an optimizer by name.

    Raises:
        ValueError: If optimizer is not supported.
    """
    name = name.lower()
    if name not in OPTIMIZERS:
        available = ", ".join(OPTIMIZERS.keys())
        raise ValueError(f"Unknown optimizer: {name}. Available: {available}")
    return OPTIMIZERS[name](lr)
