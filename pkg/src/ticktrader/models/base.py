"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from ..errors import InputError, ShapeError


def check_matrix(X, n_features: int | None = None, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InputError(f"{name} is empty")
    if n_features is not None and arr.shape[1] != n_features:
        raise ShapeError(f"{name} must have {n_features} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def check_vector(y, n: int | None = None, name: str = "y") -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ShapeError(f"{name} length {arr.shape[0]} != {n}")
    return arr


def check_labels(y, n: int, classes: int = 3, name: str = "y") -> np.ndarray:
    arr = check_vector(y, n, name)
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= classes):
        raise InputError(f"{name} labels must be in [0, {classes})")
    return arr
