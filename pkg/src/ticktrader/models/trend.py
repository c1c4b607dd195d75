"""Trend networks: market-regime score in [-1, 1] from dominance, activity, MAs.

A small dense stack with tanh everywhere; the closing tanh makes the score
bound architectural rather than a clamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .. import nn
from ..config import derive_seed
from ..errors import InputError
from .base import check_matrix, check_vector

TREND_FEATURE_COUNT = 5


@dataclass(frozen=True)
class TrendInputs:
    btc_dominance: float
    tx_volume_norm: float
    ma_daily: float
    ma_weekly: float
    ma_monthly: float

    def as_array(self) -> np.ndarray:
        arr = np.array([self.btc_dominance, self.tx_volume_norm, self.ma_daily,
                        self.ma_weekly, self.ma_monthly])
        if not np.all(np.isfinite(arr)):
            raise InputError("trend inputs must be finite")
        return arr


@dataclass(frozen=True)
class TrendScore:
    value: float
    ts: int = 0

    def __post_init__(self):
        if not -1.0 <= self.value <= 1.0 or math.isnan(self.value):
            raise InputError(f"trend score {self.value} outside [-1, 1]")


def trend_layers(hidden: tuple[int, ...] = (16, 8)) -> list[nn.LayerSpec]:
    layers: list[nn.LayerSpec] = []
    widths = (TREND_FEATURE_COUNT,) + tuple(hidden) + (1,)
    for a, b in zip(widths[:-1], widths[1:]):
        layers.append(nn.dense(a, b))
        layers.append(nn.tanh())
    return layers


def evaluate_trend(inputs: TrendInputs, params: nn.ParameterSet,
                   hidden: tuple[int, ...] = (16, 8), ts: int = 0) -> TrendScore:
    out = nn.forward(trend_layers(hidden), params, inputs.as_array())
    return TrendScore(value=float(out[0]), ts=ts)


class TrendNetwork(BaseEstimator, RegressorMixin):
    """Dense tanh regressor mapping 5 trend features to a score in [-1, 1]."""

    def __init__(self, hidden=(16, 8), learning_rate=0.02, momentum=0.9, epochs=60,
                 batch_size=256, lambda_l2=1e-4, grad_clip=5.0, seed=0):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.lambda_l2 = lambda_l2
        self.grad_clip = grad_clip
        self.seed = seed

    def _build(self) -> None:
        rng = np.random.default_rng(derive_seed(self.seed, "trend-init"))
        self.layers_ = trend_layers(tuple(self.hidden))
        self.params_ = nn.init_params(self.layers_, rng)

    def fit(self, X, y):
        X = check_matrix(X, TREND_FEATURE_COUNT)
        y = check_vector(np.asarray(y, dtype=np.float64), X.shape[0])
        if np.any(np.abs(y) > 1.0):
            raise InputError("trend targets must lie in [-1, 1]")
        self._build()
        rng = np.random.default_rng(derive_seed(self.seed, "trend-shuffle"))
        opt = nn.SGD(self.learning_rate, self.momentum)
        n = X.shape[0]
        losses = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            batches = 0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                value, grads, _ = nn.mse_loss_and_grads(
                    self.layers_, self.params_, X[idx], y[idx, None], self.lambda_l2)
                nn.clip_gradients(grads, self.grad_clip)
                opt.step(self.params_, grads)
                epoch_loss += value
                batches += 1
            losses.append(epoch_loss / batches)
        self.loss_history_ = np.array(losses)
        # monotone-smoothed view for reporting: running best epoch loss
        self.loss_report_ = np.minimum.accumulate(self.loss_history_)
        self.final_loss_ = float(self.loss_history_[-1])
        return self

    def predict(self, X) -> np.ndarray:
        X = check_matrix(X, TREND_FEATURE_COUNT)
        return nn.forward(self.layers_, self.params_, X)[:, 0]

    def score_at(self, inputs: TrendInputs, ts: int = 0) -> TrendScore:
        return evaluate_trend(inputs, self.params_, tuple(self.hidden), ts=ts)

    def save(self, path) -> None:
        nn.save_params(path, self.params_)

    @classmethod
    def load(cls, path, **kwargs) -> "TrendNetwork":
        net = cls(**kwargs)
        net.layers_ = trend_layers(tuple(net.hidden))
        net.params_ = nn.load_params(path)
        for name in net.params_.names():
            net.params_[name].regularized = name.endswith(".w")
        return net
