import math

import numpy as np
import pytest
from sklearn.base import clone

from ticktrader import nn
from ticktrader.errors import InputError
from ticktrader.models import TrendInputs, TrendNetwork, TrendScore, evaluate_trend
from ticktrader.models.trend import trend_layers


def zeroed_params(hidden=(16, 8)):
    params = nn.init_params(trend_layers(hidden), np.random.default_rng(0))
    for name in params.names():
        params[name].values[:] = 0.0
    return params


def test_all_zero_params_score_zero():
    inputs = TrendInputs(0.7, 1.2, -0.3, 0.1, 0.9)
    score = evaluate_trend(inputs, zeroed_params())
    assert score.value == 0.0


def test_hand_built_single_layer_tanh():
    # w = [1,0,0,0,0], b = 0: score = tanh(dominance)
    params = nn.ParameterSet()
    params.add("0.w", nn.Tensor(np.array([[1.0, 0.0, 0.0, 0.0, 0.0]])))
    params.add("0.b", nn.Tensor(np.zeros(1), regularized=False))
    inputs = TrendInputs(0.5, 0.0, 0.0, 0.0, 0.0)
    score = evaluate_trend(inputs, params, hidden=())
    assert score.value == pytest.approx(math.tanh(0.5), abs=1e-12)
    assert abs(score.value - 0.4621) < 1e-4


def test_output_always_in_bounds_fuzz():
    rng = np.random.default_rng(1)
    layers = trend_layers((16, 8))
    for trial in range(100):
        params = nn.init_params(layers, np.random.default_rng(trial))
        for name in params.names():  # widen weights well past init scale
            params[name].values *= rng.uniform(0.5, 40.0)
        X = rng.normal(scale=5.0, size=(100, 5))
        out = nn.forward(layers, params, X)
        assert np.all(out >= -1.0) and np.all(out <= 1.0)


def test_continuity_small_perturbation():
    layers = trend_layers((16, 8))
    params = nn.init_params(layers, np.random.default_rng(3))
    x = np.array([0.4, -1.0, 0.2, 0.7, -0.1])
    base = nn.forward(layers, params, x)[0]
    for i in range(5):
        bumped = x.copy()
        bumped[i] += 1e-9
        assert abs(nn.forward(layers, params, bumped)[0] - base) < 1e-6


def test_nonfinite_input_rejected():
    with pytest.raises(InputError):
        evaluate_trend(TrendInputs(float("nan"), 0, 0, 0, 0), zeroed_params())


def test_trend_score_bounds_enforced():
    with pytest.raises(InputError):
        TrendScore(value=1.5)


class TestTraining:
    def test_memorize_single_sample(self):
        net = TrendNetwork(epochs=400, learning_rate=0.05, lambda_l2=0.0, seed=1)
        X = np.array([[0.2, -0.4, 0.9, 0.0, 0.3]])
        y = np.array([0.62])
        net.fit(X, y)
        assert net.final_loss_ < 1e-4

    def test_constant_zero_targets(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(200, 5))
        net = TrendNetwork(epochs=300, learning_rate=0.08, lambda_l2=0.0, seed=2)
        net.fit(X, np.zeros(200))
        assert np.all(np.abs(net.predict(X)) < 0.05)

    def test_synthetic_rule_generalizes(self):
        # target = sign(ma_daily) * min(1, |ma_daily|); held-out MSE < 0.05
        rng = np.random.default_rng(7)
        X = rng.normal(size=(4000, 5))
        ma_daily = X[:, 2]
        y = np.sign(ma_daily) * np.minimum(1.0, np.abs(ma_daily))
        net = TrendNetwork(epochs=150, learning_rate=0.03, lambda_l2=1e-5, seed=3)
        net.fit(X[:3000], y[:3000])
        mse = float(np.mean((net.predict(X[3000:]) - y[3000:]) ** 2))
        assert mse < 0.05

    def test_empty_dataset_rejected(self):
        with pytest.raises(Exception):
            TrendNetwork().fit(np.zeros((0, 5)), np.zeros(0))

    def test_loss_report_monotone(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(500, 5))
        y = np.tanh(X[:, 0])
        net = TrendNetwork(epochs=30, seed=4).fit(X, y)
        assert np.all(np.diff(net.loss_report_) <= 0.0)

    def test_estimator_protocol(self):
        net = TrendNetwork(hidden=(8, 4), epochs=5, seed=9)
        cloned = clone(net)
        assert cloned.get_params()["hidden"] == (8, 4)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 5))
        cloned.fit(X, np.zeros(50))
        assert cloned.predict(X).shape == (50,)

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(300, 5))
        y = np.tanh(X[:, 1])
        net = TrendNetwork(epochs=20, seed=6).fit(X, y)
        net.save(tmp_path / "trend.ptnn")
        loaded = TrendNetwork.load(tmp_path / "trend.ptnn")
        np.testing.assert_array_equal(net.predict(X), loaded.predict(X))
