"""Layer specs and the batched forward/backward kernel.

Layer kinds: conv1d, dense, relu, tanh, softmax, flatten. A network is a
plain list of LayerSpec; parameters live in a ParameterSet keyed by
"{prefix}{index}.w" / "{prefix}{index}.b". Everything is float64 and
side-effect free: forward never mutates inputs or params.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import InputError, ShapeError
from .tensor import ParameterSet, Tensor


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 0
    stride: int = 1
    in_dim: int = 0
    out_dim: int = 0

    def has_params(self) -> bool:
        return self.kind in ("conv1d", "dense")


def conv1d(in_ch: int, out_ch: int, kernel: int, stride: int = 1) -> LayerSpec:
    if min(in_ch, out_ch, kernel, stride) < 1:
        raise InputError("conv1d sizes must be >= 1")
    return LayerSpec("conv1d", in_ch=in_ch, out_ch=out_ch, kernel=kernel, stride=stride)


def dense(in_dim: int, out_dim: int) -> LayerSpec:
    if min(in_dim, out_dim) < 1:
        raise InputError("dense sizes must be >= 1")
    return LayerSpec("dense", in_dim=in_dim, out_dim=out_dim)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def tanh() -> LayerSpec:
    return LayerSpec("tanh")


def softmax_layer() -> LayerSpec:
    return LayerSpec("softmax")


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def _conv_out_len(length: int, kernel: int, stride: int) -> int:
    if length < kernel:
        raise ShapeError(f"conv1d: input length {length} < kernel {kernel}")
    return (length - kernel) // stride + 1


def output_shape(layers: list[LayerSpec], in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Walk the chain, validating compatibility; returns the unbatched output shape."""
    shape = tuple(in_shape)
    for i, spec in enumerate(layers):
        if spec.kind == "conv1d":
            if len(shape) != 2 or shape[0] != spec.in_ch:
                raise ShapeError(f"layer {i} (conv1d): expected ({spec.in_ch}, L), got {shape}")
            shape = (spec.out_ch, _conv_out_len(shape[1], spec.kernel, spec.stride))
        elif spec.kind == "dense":
            if len(shape) != 1 or shape[0] != spec.in_dim:
                raise ShapeError(f"layer {i} (dense): expected ({spec.in_dim},), got {shape}")
            shape = (spec.out_dim,)
        elif spec.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif spec.kind in ("relu", "tanh", "softmax"):
            pass
        else:
            raise InputError(f"unknown layer kind {spec.kind!r}")
    return shape


def init_params(layers: list[LayerSpec], rng: np.random.Generator,
                prefix: str = "") -> ParameterSet:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    params = ParameterSet()
    for i, spec in enumerate(layers):
        if spec.kind == "conv1d":
            fan_in = spec.in_ch * spec.kernel
            fan_out = spec.out_ch * spec.kernel
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(spec.out_ch, spec.in_ch, spec.kernel))
            params.add(f"{prefix}{i}.w", Tensor(w))
            params.add(f"{prefix}{i}.b", Tensor(np.zeros(spec.out_ch), regularized=False))
        elif spec.kind == "dense":
            limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
            w = rng.uniform(-limit, limit, size=(spec.out_dim, spec.in_dim))
            params.add(f"{prefix}{i}.w", Tensor(w))
            params.add(f"{prefix}{i}.b", Tensor(np.zeros(spec.out_dim), regularized=False))
    return params


def _conv_windows(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """(B, C, L) -> read-only view (B, L_out, C, K)."""
    b, c, length = x.shape
    lout = (length - kernel) // stride + 1
    sb, sc, sl = x.strides
    return as_strided(x, shape=(b, lout, c, kernel),
                      strides=(sb, sl * stride, sc, sl), writeable=False)


def _stable_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _apply(spec: LayerSpec, i: int, params: ParameterSet, x: np.ndarray,
           prefix: str) -> np.ndarray:
    if spec.kind == "conv1d":
        if x.ndim != 3 or x.shape[1] != spec.in_ch:
            raise ShapeError(f"layer {i} (conv1d): expected (B, {spec.in_ch}, L), got {x.shape}")
        w = params[f"{prefix}{i}.w"].values
        b = params[f"{prefix}{i}.b"].values
        win = _conv_windows(x, spec.kernel, spec.stride)
        y = np.tensordot(win, w, axes=([2, 3], [1, 2])).transpose(0, 2, 1)
        y += b[None, :, None]
        return y
    if spec.kind == "dense":
        if x.ndim != 2 or x.shape[1] != spec.in_dim:
            raise ShapeError(f"layer {i} (dense): expected (B, {spec.in_dim}), got {x.shape}")
        w = params[f"{prefix}{i}.w"].values
        b = params[f"{prefix}{i}.b"].values
        return x @ w.T + b
    if spec.kind == "relu":
        return np.maximum(x, 0.0)
    if spec.kind == "tanh":
        return np.tanh(x)
    if spec.kind == "softmax":
        return _stable_softmax(x)
    if spec.kind == "flatten":
        return x.reshape(x.shape[0], -1)
    raise InputError(f"unknown layer kind {spec.kind!r}")


def _ensure_batched(layers: list[LayerSpec], x: np.ndarray) -> tuple[np.ndarray, bool]:
    expected = 3 if layers and layers[0].kind == "conv1d" else 2
    if x.ndim == expected:
        return x, True
    if x.ndim == expected - 1:
        return x[None, ...], False
    raise ShapeError(f"layer 0 ({layers[0].kind if layers else '?'}): "
                     f"cannot interpret input of rank {x.ndim}")


def forward(layers: list[LayerSpec], params: ParameterSet, x, prefix: str = "") -> np.ndarray:
    """Run the chain. Accepts a single sample or a batch (leading axis)."""
    arr = x.values if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    arr, batched = _ensure_batched(layers, arr)
    for i, spec in enumerate(layers):
        arr = _apply(spec, i, params, arr, prefix)
    return arr if batched else arr[0]


def forward_trace(layers: list[LayerSpec], params: ParameterSet, x: np.ndarray,
                  prefix: str = "") -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Batched forward that records (input, output) per layer for backward."""
    trace: list[tuple[np.ndarray, np.ndarray]] = []
    arr = np.asarray(x, dtype=np.float64)
    for i, spec in enumerate(layers):
        out = _apply(spec, i, params, arr, prefix)
        trace.append((arr, out))
        arr = out
    return arr, trace


def backward_trace(layers: list[LayerSpec], params: ParameterSet,
                   trace: list[tuple[np.ndarray, np.ndarray]], grad_out: np.ndarray,
                   grads: dict[str, np.ndarray], prefix: str = "") -> np.ndarray:
    """Reverse-mode pass over a recorded trace.

    Accumulates parameter gradients into `grads` (creating entries as needed)
    and returns the gradient with respect to the chain input.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    for i in range(len(layers) - 1, -1, -1):
        spec = layers[i]
        x, y = trace[i]
        if spec.kind == "conv1d":
            w = params[f"{prefix}{i}.w"].values
            win = _conv_windows(x, spec.kernel, spec.stride)
            gw = np.tensordot(g, win, axes=([0, 2], [0, 1]))
            gb = g.sum(axis=(0, 2))
            gx = np.zeros_like(x)
            lout = y.shape[2]
            span = spec.stride * (lout - 1) + 1
            for k in range(spec.kernel):
                # y[b,o,l] consumed x[b,c,l*stride+k]
                gx[:, :, k:k + span:spec.stride] += np.einsum(
                    "bol,oc->bcl", g, w[:, :, k], optimize=True)
            _acc(grads, f"{prefix}{i}.w", gw)
            _acc(grads, f"{prefix}{i}.b", gb)
            g = gx
        elif spec.kind == "dense":
            w = params[f"{prefix}{i}.w"].values
            _acc(grads, f"{prefix}{i}.w", g.T @ x)
            _acc(grads, f"{prefix}{i}.b", g.sum(axis=0))
            g = g @ w
        elif spec.kind == "relu":
            g = g * (x > 0.0)
        elif spec.kind == "tanh":
            g = g * (1.0 - y * y)
        elif spec.kind == "softmax":
            dot = (g * y).sum(axis=-1, keepdims=True)
            g = y * (g - dot)
        elif spec.kind == "flatten":
            g = g.reshape(x.shape)
    return g


def _acc(grads: dict[str, np.ndarray], name: str, g: np.ndarray) -> None:
    if name in grads:
        grads[name] += g
    else:
        grads[name] = g.astype(np.float64, copy=True)
