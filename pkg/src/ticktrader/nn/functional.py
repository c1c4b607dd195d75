"""Softmax, cross-entropy with L2, and whole-chain gradient helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError, ShapeError
from .layers import LayerSpec, backward_trace, forward_trace, _stable_softmax
from .tensor import ParameterSet

LOG_CLAMP_EPS = 1e-12


class _ClampCounter:
    """Counts zero-probability label clamps instead of aborting training."""

    def __init__(self):
        self.count = 0


_CLAMP = _ClampCounter()


def clamp_warnings() -> int:
    return _CLAMP.count


def reset_clamp_warnings() -> None:
    _CLAMP.count = 0


@dataclass(frozen=True)
class LossConfig:
    lambda_l2: float = 0.0
    class_count: int = 3

    def __post_init__(self):
        if self.lambda_l2 < 0:
            raise InputError("lambda_l2 must be nonnegative")
        if self.class_count < 1:
            raise InputError("class_count must be positive")


def softmax(logits) -> np.ndarray:
    """Max-subtracted softmax over the last axis. Rejects empty or non-finite input."""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise InputError("softmax: empty input")
    if not np.all(np.isfinite(z)):
        raise InputError("softmax: non-finite entry")
    return _stable_softmax(z)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """-log p[label], clamping zero probabilities to 1e-12 (counted, not fatal)."""
    p = float(probs[label])
    if p < LOG_CLAMP_EPS:
        _CLAMP.count += 1
        p = LOG_CLAMP_EPS
    return -float(np.log(p))


def loss(probs, label: int, params: ParameterSet, cfg: LossConfig) -> float:
    """Cross-entropy plus lambda_l2 * sum of squared regularized weights."""
    p = np.asarray(probs, dtype=np.float64)
    if label < 0 or label >= cfg.class_count:
        raise InputError(f"label {label} out of range for {cfg.class_count} classes")
    if p.shape != (cfg.class_count,):
        raise ShapeError(f"probs shape {p.shape} != ({cfg.class_count},)")
    return cross_entropy(p, label) + cfg.lambda_l2 * params.l2_penalty()


def _check_softmax_tail(layers: list[LayerSpec]) -> None:
    if not layers or layers[-1].kind != "softmax":
        raise InputError("cross-entropy backward requires a softmax output layer")


def loss_and_grads(layers: list[LayerSpec], params: ParameterSet, x: np.ndarray,
                   labels: np.ndarray, cfg: LossConfig, prefix: str = "",
                   ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """Batched mean cross-entropy + L2 over one chain; returns (loss, grads, probs).

    `x` is (B, ...) and `labels` is (B,). Gradients are of the mean loss.
    """
    _check_softmax_tail(layers)
    labels = np.asarray(labels)
    probs, trace = forward_trace(layers, params, x, prefix)
    b = probs.shape[0]
    picked = probs[np.arange(b), labels]
    clamped = picked < LOG_CLAMP_EPS
    if clamped.any():
        _CLAMP.count += int(clamped.sum())
        picked = np.maximum(picked, LOG_CLAMP_EPS)
    value = float(-np.log(picked).mean()) + cfg.lambda_l2 * params.l2_penalty()

    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    grads: dict[str, np.ndarray] = {}
    # skip the softmax layer: dlogits is already d(mean CE)/d(pre-softmax)
    backward_trace(layers[:-1], params, trace[:-1], dlogits, grads, prefix)
    _add_l2(grads, params, cfg.lambda_l2)
    return value, grads, probs


def backward(layers: list[LayerSpec], params: ParameterSet, x, label: int,
             cfg: LossConfig, prefix: str = "") -> dict[str, np.ndarray]:
    """Single-sample reverse-mode gradients of loss(); fills each tensor's grad slot.

    Frozen tensors get all-zero gradients.
    """
    arr = np.asarray(x, dtype=np.float64)
    batched = not (layers and layers[0].kind == "conv1d" and arr.ndim == 2
                   or layers and layers[0].kind != "conv1d" and arr.ndim == 1)
    if not batched:
        arr = arr[None, ...]
    _, grads, _ = loss_and_grads(layers, params, arr, np.array([label]), cfg, prefix)
    for name, t in params.items():
        g = grads.get(name)
        if g is None or not t.trainable:
            g = np.zeros_like(t.values)
        t.set_grad(g)
        grads[name] = g
    return grads


def _add_l2(grads: dict[str, np.ndarray], params: ParameterSet, lambda_l2: float) -> None:
    if lambda_l2 == 0.0:
        return
    for name, t in params.items():
        if t.trainable and t.regularized and name in grads:
            grads[name] += 2.0 * lambda_l2 * t.values


def mse_loss_and_grads(layers: list[LayerSpec], params: ParameterSet, x: np.ndarray,
                       targets: np.ndarray, lambda_l2: float = 0.0, prefix: str = "",
                       ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """Batched mean squared error + L2 for regression chains (trend networks)."""
    out, trace = forward_trace(layers, params, x, prefix)
    t = np.asarray(targets, dtype=np.float64).reshape(out.shape)
    resid = out - t
    value = float((resid * resid).mean()) + lambda_l2 * params.l2_penalty()
    dout = 2.0 * resid / resid.size
    grads: dict[str, np.ndarray] = {}
    backward_trace(layers, params, trace, dout, grads, prefix)
    _add_l2(grads, params, lambda_l2)
    return value, grads, out
