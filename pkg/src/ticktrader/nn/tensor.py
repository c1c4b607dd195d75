"""Dense float64 tensors with gradient slots, and named parameter collections."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from ..errors import InputError, ShapeError


class Tensor:
    """A named slab of float64 values plus an optional same-shaped gradient.

    All learnable state in the package lives in these. `trainable` marks
    whether the optimizer may touch it; `regularized` marks whether it
    participates in the L2 penalty (weights yes, biases no).
    """

    __slots__ = ("values", "grad", "trainable", "regularized")

    def __init__(self, values, trainable: bool = True, regularized: bool = True):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.trainable = trainable
        self.regularized = regularized

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.values)

    def set_grad(self, g: np.ndarray) -> None:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.values.shape:
            raise ShapeError(f"grad shape {g.shape} != value shape {self.values.shape}")
        self.grad = g

    def copy(self) -> "Tensor":
        t = Tensor(self.values.copy(), self.trainable, self.regularized)
        if self.grad is not None:
            t.grad = self.grad.copy()
        return t

    def __repr__(self) -> str:
        flags = "" if self.trainable else ", frozen"
        return f"Tensor(shape={self.shape}{flags})"


class ParameterSet:
    """Ordered, uniquely named map of Tensors."""

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> None:
        if name in self._tensors:
            raise InputError(f"duplicate parameter name {name!r}")
        self._tensors[name] = tensor

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise InputError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def total_count(self) -> int:
        """Number of trainable scalar parameters."""
        return sum(t.size for t in self._tensors.values() if t.trainable)

    def freeze(self, *names: str) -> None:
        for name in names:
            self[name].trainable = False

    def zero_grads(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def copy(self) -> "ParameterSet":
        out = ParameterSet()
        for name, t in self._tensors.items():
            out.add(name, t.copy())
        return out

    def l2_penalty(self) -> float:
        """Sum of squares over trainable, regularized tensors."""
        acc = 0.0
        for t in self._tensors.values():
            if t.trainable and t.regularized:
                acc += float(np.dot(t.values.ravel(), t.values.ravel()))
        return acc

    def flat_values(self) -> np.ndarray:
        """Concatenated trainable values, in insertion order. For checksums/tests."""
        chunks = [t.values.ravel() for t in self._tensors.values() if t.trainable]
        if not chunks:
            return np.zeros(0)
        return np.concatenate(chunks)

    def validate(self) -> None:
        for name, t in self._tensors.items():
            if t.values.size != math.prod(t.values.shape or (1,)):
                raise ShapeError(f"{name}: inconsistent shape/values")
            if t.grad is not None and t.grad.shape != t.values.shape:
                raise ShapeError(f"{name}: grad shape mismatch")

    def __repr__(self) -> str:
        return f"ParameterSet({len(self._tensors)} tensors, {self.total_count()} trainable)"
