"""Shared numeric oracles for the test suite."""

from __future__ import annotations

import numpy as np


def finite_diff_grads(loss_fn, params, step=1e-5):
    """Central finite differences of a scalar loss over every tensor in params.

    Perturbs values in place and restores them; loss_fn takes no arguments.
    """
    grads = {}
    for name, t in params.items():
        flat = t.values.ravel()
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_fn()
            flat[i] = orig - step
            lm = loss_fn()
            flat[i] = orig
            g[i] = (lp - lm) / (2.0 * step)
        grads[name] = g.reshape(t.values.shape)
    return grads


def max_rel_err(a, b, floor=1e-8):
    """max |a-b| / max(|a|, |b|, floor), elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
