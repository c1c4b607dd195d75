import math

import numpy as np
import pytest

from ticktrader.backtest import (BacktestReport, Fill, RiskLimits, SlippageModel,
                                 Trade, apply_fill, max_drawdown, profit_factor,
                                 run_ledger, sharpe, win_rate)
from ticktrader.backtest.metrics import pf_flag
from ticktrader.config import ExecConfig
from ticktrader.errors import FeedError, InputError

MIN = 60_000

BUY, SELL, HOLD, NONE = 0, 1, 2, 3
LARGE, SMALL, NO_TIER = 0, 1, 2


def mk_fill(ts=0, side="buy", qty=1.0, px=100.0, fee=0.0, executed=None):
    return Fill(ts=ts, side=side, quantity=qty, reference_price=px,
                executed_price=executed if executed is not None else px, fee=fee)


def mk_trade(pnl, qty=1.0, entry_px=100.0):
    exit_px = entry_px + pnl / qty
    entry = mk_fill(ts=0, side="buy", qty=qty, px=entry_px)
    exit_ = mk_fill(ts=MIN, side="sell", qty=qty, px=exit_px)
    return Trade(entry=entry, exit=exit_, direction=1, pnl=pnl, holding_time=MIN)


class TestFills:
    def test_zero_cost_zero_slip(self):
        f = apply_fill(0, "buy", 2.0, 100.0, 0.0, 0.0)
        assert f.executed_price == 100.0 and f.fee == 0.0

    def test_paper_fee_rate_oracle(self):
        # buy 1 @ 100 with 5bp fees: fee 0.05, cash delta -100.05
        f = apply_fill(0, "buy", 1.0, 100.0, 0.0005, 0.0)
        assert f.fee == pytest.approx(0.05)
        assert -(f.quantity * f.executed_price + f.fee) == pytest.approx(-100.05)

    def test_sell_slippage_adverse(self):
        f = apply_fill(0, "sell", 1.0, 100.0, 0.0, 10.0)  # 10 bps against
        assert f.executed_price == pytest.approx(99.90)

    def test_buy_slippage_adverse(self):
        f = apply_fill(0, "buy", 1.0, 100.0, 0.0, 10.0)
        assert f.executed_price == pytest.approx(100.10)

    def test_rejects_nonpositive(self):
        with pytest.raises(InputError):
            apply_fill(0, "buy", 0.0, 100.0, 0.0, 0.0)
        with pytest.raises(InputError):
            apply_fill(0, "buy", 1.0, -5.0, 0.0, 0.0)

    def test_half_normal_slippage_stats(self):
        model = SlippageModel(2.0, seed=0)
        draws = np.array([model.draw() for _ in range(20_000)])
        assert np.all(draws >= 0)
        assert abs(draws.mean() - 2.0) < 0.1


class TestMetrics:
    def test_profit_factor_oracle(self):
        trades = [mk_trade(10.0), mk_trade(5.0), mk_trade(-5.0)]
        assert profit_factor(trades) == pytest.approx(3.0)

    def test_only_losses_zero(self):
        assert profit_factor([mk_trade(-4.0), mk_trade(-1.0)]) == 0.0

    def test_no_trades_undefined(self):
        assert profit_factor([]) is None
        assert pf_flag(None) == "undefined"

    def test_no_losses_flagged_infinite(self):
        v = profit_factor([mk_trade(3.0)])
        assert math.isinf(v) and pf_flag(v) == "infinite"

    def test_max_drawdown_scan_oracle(self):
        assert max_drawdown([100.0, 120.0, 90.0, 110.0]) == pytest.approx(0.25)

    def test_monotone_equity_zero_drawdown(self):
        assert max_drawdown([100.0, 100.0, 101.0, 150.0]) == 0.0

    def test_win_rate(self):
        trades = [mk_trade(1.0), mk_trade(2.0), mk_trade(0.5), mk_trade(-1.0)]
        assert win_rate(trades) == 0.75

    def test_sharpe_zero_variance_flagged(self):
        value, flag = sharpe(np.full(10, 100.0), 525_600)
        assert value is None and flag == "zero_variance"

    def test_sharpe_sign(self):
        eq = 100 * np.cumprod(1 + np.full(999, 1e-4) +
                              np.random.default_rng(0).normal(0, 1e-4, 999))
        value, flag = sharpe(np.r_[100.0, eq], 525_600)
        assert flag == "normal" and value > 0


def rows_from(prices: dict[int, float], actions: dict[int, tuple[int, int]], n: int):
    """Build (ts, price, action, tier) rows over n ticks."""
    out = []
    for i in range(1, n + 1):
        ts = i * MIN
        price = prices.get(i, 100.0)
        action, tier = actions.get(i, (NONE, NO_TIER))
        out.append((ts, price, action, tier))
    return out


def frictionless(**kwargs) -> ExecConfig:
    defaults = dict(fee_rate=0.0, slippage_bps_mean=0.0, profit_target=0.01,
                    stop=0.0075)
    defaults.update(kwargs)
    return ExecConfig(**defaults)


WIDE_LIMITS = RiskLimits(max_position_fraction=0.5, max_drawdown_halt=0.9,
                         per_trade_stop=0.0075, profit_target=0.01,
                         size_large=0.5, size_small=0.2)


class TestLedger:
    def test_all_no_action_flat(self):
        report = run_ledger(rows_from({}, {}, 50), frictionless(), WIDE_LIMITS, seed=1)
        assert report.trade_count == 0
        assert report.final_equity == report.initial_equity
        assert np.all(report.equity == report.initial_equity)

    def test_scripted_one_percent_gain(self):
        # decision at tick 1, entry fills at tick 2 @100, exit forced at +1% target
        prices = {2: 100.0, 3: 101.0, 4: 101.0, 5: 101.0}
        actions = {1: (BUY, LARGE)}
        report = run_ledger(rows_from(prices, actions, 5), frictionless(),
                            WIDE_LIMITS, seed=2)
        assert report.trade_count == 1
        trade = report.trades[0]
        # position is half of equity: pnl = 0.5 * initial * 1%
        assert trade.pnl == pytest.approx(0.01 * 0.5 * report.initial_equity)
        assert report.final_equity == pytest.approx(
            report.initial_equity + trade.pnl)
        assert report.counters["exit_target"] == 1

    def test_stop_exit(self):
        prices = {2: 100.0, 3: 99.0, 4: 99.0, 5: 99.0}
        actions = {1: (BUY, LARGE)}
        report = run_ledger(rows_from(prices, actions, 5), frictionless(),
                            WIDE_LIMITS, seed=3)
        assert report.counters["exit_stop"] == 1
        assert report.trades[0].pnl < 0

    def test_short_side_symmetric(self):
        prices = {2: 100.0, 3: 99.0, 4: 99.0, 5: 99.0}
        actions = {1: (SELL, LARGE)}
        report = run_ledger(rows_from(prices, actions, 5), frictionless(),
                            WIDE_LIMITS, seed=4)
        assert report.trades[0].direction == -1
        assert report.trades[0].pnl == pytest.approx(0.01 * 0.5 * 100_000)

    def test_zero_cost_round_trip_flat_price_zero_pnl(self):
        prices = {i: 100.0 for i in range(1, 10)}
        actions = {1: (BUY, LARGE), 4: (SELL, LARGE)}
        cfg = frictionless(signal_exit_min_hold=0)
        report = run_ledger(rows_from(prices, actions, 9), cfg, WIDE_LIMITS, seed=5)
        assert report.trade_count == 1
        assert report.trades[0].pnl == pytest.approx(0.0, abs=1e-9)
        assert report.counters["exit_signal"] == 1

    def test_opposing_signal_blocked_by_min_hold(self):
        prices = {i: 100.0 for i in range(1, 10)}
        actions = {1: (BUY, LARGE), 4: (SELL, LARGE)}
        cfg = frictionless(signal_exit_min_hold=60)
        report = run_ledger(rows_from(prices, actions, 9), cfg, WIDE_LIMITS, seed=6)
        assert report.counters["exit_signal"] == 0
        assert report.counters["signal_exit_blocked_min_hold"] == 1
        assert report.counters["exit_end_of_data"] == 1

    def test_fees_and_slippage_reduce_pnl(self):
        prices = {2: 100.0, 3: 101.0, 4: 101.0, 5: 101.0}
        actions = {1: (BUY, LARGE)}
        costly = ExecConfig(fee_rate=0.0005, slippage_bps_mean=2.0,
                            profit_target=0.01, stop=0.0075)
        r_cost = run_ledger(rows_from(prices, actions, 5), costly, WIDE_LIMITS, seed=7)
        r_free = run_ledger(rows_from(prices, actions, 5), frictionless(),
                            WIDE_LIMITS, seed=7)
        assert r_cost.trades[0].pnl < r_free.trades[0].pnl
        assert r_cost.trades[0].entry.fee > 0

    def test_ledger_conservation_random_walk(self):
        rng = np.random.default_rng(8)
        n = 4000
        prices = {i: 100.0 * float(np.exp(rng.normal(0, 0.002) * i ** 0))
                  for i in range(1, n + 1)}
        # random decided actions
        actions = {}
        for i in range(1, n + 1, 7):
            actions[i] = (int(rng.integers(0, 2)), int(rng.integers(0, 2)))
        cfg = ExecConfig(fee_rate=0.0005, slippage_bps_mean=2.0,
                         profit_target=0.004, stop=0.003)
        report = run_ledger(rows_from(prices, actions, n), cfg, WIDE_LIMITS, seed=9)
        pnl = sum(t.pnl for t in report.trades)
        assert abs(report.final_equity - (report.initial_equity + pnl)) < 1e-9
        report.self_check()

    def test_missing_bar_defers_fill(self):
        prices = {2: float("nan"), 3: 100.0, 4: 100.0, 5: 102.0, 6: 102.0}
        actions = {1: (BUY, LARGE)}
        report = run_ledger(rows_from(prices, actions, 6), frictionless(),
                            WIDE_LIMITS, seed=10)
        assert report.trade_count == 1
        assert report.trades[0].entry.ts == 3 * MIN  # deferred past the hole

    def test_drawdown_halt_freezes_entries(self):
        limits = RiskLimits(max_position_fraction=0.9, max_drawdown_halt=0.05,
                            per_trade_stop=0.10, profit_target=0.9,
                            size_large=0.9, size_small=0.2)
        prices = {i: 100.0 for i in range(1, 30)}
        for i in range(3, 10):
            prices[i] = 100.0 - 2.0 * (i - 2)  # crash while long
        actions = {1: (BUY, LARGE), 12: (BUY, LARGE), 20: (BUY, LARGE)}
        report = run_ledger(rows_from(prices, actions, 29),
                            frictionless(profit_target=0.9, stop=0.10), limits,
                            seed=11)
        assert report.halt_events, "halt expected"
        halt_ts = report.halt_events[0]
        later_entries = [t for t in report.trades if t.entry.ts > halt_ts]
        assert later_entries == []
        assert report.counters["entries_blocked_halt"] >= 1

    def test_determinism_same_seed_same_hash(self):
        rng = np.random.default_rng(12)
        prices = {i: float(100 + rng.normal(0, 1)) for i in range(1, 500)}
        actions = {i: (int(rng.integers(0, 2)), SMALL) for i in range(1, 500, 11)}
        cfg = ExecConfig(fee_rate=0.0005, slippage_bps_mean=2.0)
        r1 = run_ledger(rows_from(prices, actions, 499), cfg, WIDE_LIMITS, seed=13)
        r2 = run_ledger(rows_from(prices, actions, 499), cfg, WIDE_LIMITS, seed=13)
        assert r1.report_hash() == r2.report_hash()

    def test_distinct_seeds_change_slippage_only(self):
        rng = np.random.default_rng(14)
        prices = {i: float(100 + rng.normal(0, 1)) for i in range(1, 500)}
        actions = {i: (int(rng.integers(0, 2)), SMALL) for i in range(1, 500, 13)}
        cfg = ExecConfig(fee_rate=0.0005, slippage_bps_mean=2.0)
        r1 = run_ledger(rows_from(prices, actions, 499), cfg, WIDE_LIMITS, seed=15)
        r2 = run_ledger(rows_from(prices, actions, 499), cfg, WIDE_LIMITS, seed=16)
        assert r1.report_hash() != r2.report_hash()
        assert r1.trade_count == r2.trade_count
        assert [t.entry.ts for t in r1.trades] == [t.entry.ts for t in r2.trades]
        assert [t.entry.reference_price for t in r1.trades] == \
            [t.entry.reference_price for t in r2.trades]

    def test_feed_error_truncates_with_flag(self):
        def rows():
            yield (MIN, 100.0, BUY, LARGE)
            yield (2 * MIN, 100.0, NONE, NO_TIER)
            raise FeedError("socket dropped")

        report = run_ledger(rows(), frictionless(), WIDE_LIMITS, seed=17)
        assert report.truncated
        report.self_check()  # still a consistent ledger

    def test_trade_pnl_consistency_enforced(self):
        entry = mk_fill(ts=0, side="buy", qty=1.0, px=100.0)
        exit_ = mk_fill(ts=MIN, side="sell", qty=1.0, px=101.0)
        with pytest.raises(InputError):
            Trade(entry=entry, exit=exit_, direction=1, pnl=5.0, holding_time=MIN)

    def test_report_metrics_recomputable(self):
        prices = {2: 100.0, 3: 101.0, 4: 101.0, 5: 101.0, 6: 101.0}
        actions = {1: (BUY, LARGE)}
        report = run_ledger(rows_from(prices, actions, 6), frictionless(),
                            WIDE_LIMITS, seed=18)
        m = report.metrics()
        assert m["profit_factor_flag"] == "infinite"
        assert m["win_rate"] == 1.0
        assert m["trade_count"] == len(report.trades)
