"""Plain gradient descent with optional momentum. Single-writer by contract."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from .tensor import ParameterSet


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale the whole gradient set so its global L2 norm is at most max_norm.

    Returns the factor applied (1.0 when already inside the bound).
    """
    if max_norm <= 0:
        return 1.0
    total = math.sqrt(sum(float(np.dot(g.ravel(), g.ravel()))
                          for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return 1.0
    scale = max_norm / total
    for g in grads.values():
        g *= scale
    return scale


def optimizer_step(params: ParameterSet, grads: dict[str, np.ndarray],
                   learning_rate: float) -> ParameterSet:
    """w <- w - lr * g for every trainable tensor. Frozen tensors untouched."""
    for name, t in params.items():
        if not t.trainable:
            continue
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != t.values.shape:
            raise ShapeError(f"{name}: grad shape {g.shape} != value shape {t.values.shape}")
        t.values -= learning_rate * g
    return params


class SGD:
    """Gradient descent with optional momentum, keyed by parameter name."""

    def __init__(self, learning_rate: float, momentum: float = 0.0):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity: dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet, grads: dict[str, np.ndarray]) -> ParameterSet:
        if self.momentum == 0.0:
            return optimizer_step(params, grads, self.learning_rate)
        for name, t in params.items():
            if not t.trainable or name not in grads:
                continue
            g = grads[name]
            if g.shape != t.values.shape:
                raise ShapeError(f"{name}: grad shape {g.shape} != value shape {t.values.shape}")
            v = self._velocity.get(name)
            if v is None:
                v = np.zeros_like(t.values)
            v = self.momentum * v - self.learning_rate * g
            self._velocity[name] = v
            t.values += v
        return params
