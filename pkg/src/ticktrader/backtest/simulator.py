"""Sequential tick ledger: entries, exits, risk halts, conservation.

Fills never happen on the tick that triggered them; orders queue and
execute at the next tick's reference price, one pending operation at a
time. The ledger is single-writer; parallelism belongs across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..config import ExecConfig, derive_seed
from ..errors import FeedError, InputError
from .execution import Fill, SlippageModel, apply_fill
from .metrics import BacktestReport, Trade

ACT_BUY, ACT_SELL, ACT_HOLD, ACT_NONE = 0, 1, 2, 3
TIER_FRACTION = {0: "size_large", 1: "size_small"}


@dataclass(frozen=True)
class RiskLimits:
    max_position_fraction: float = 0.10
    max_drawdown_halt: float = 0.25
    per_trade_stop: float = 0.003
    profit_target: float = 0.004
    size_large: float = 0.10
    size_small: float = 0.04

    def __post_init__(self):
        for name in ("max_position_fraction", "max_drawdown_halt", "per_trade_stop",
                     "profit_target", "size_large", "size_small"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InputError(f"risk limit {name} must be in (0, 1]")

    def fraction(self, tier: int) -> float:
        base = self.size_large if tier == 0 else self.size_small
        return min(base, self.max_position_fraction)


@dataclass
class _Position:
    direction: int
    quantity: float
    entry: Fill
    cash_before: float  # flat-ledger cash at entry; exit pnl is the exact cash delta


def run_ledger(rows, exec_cfg: ExecConfig, limits: RiskLimits, seed: int,
               initial_equity: float = 100_000.0) -> BacktestReport:
    """Run the trade cycle over (ts, price, action, tier) rows.

    `price` may be NaN when the bar backing a tick is missing; marking then
    uses the last seen price and fills stay queued. A FeedError from the row
    source truncates the run and flags the report rather than failing it.
    """
    slippage = SlippageModel(exec_cfg.slippage_bps_mean, derive_seed(seed, "exec"))
    cash = initial_equity
    position: _Position | None = None
    pending: tuple | None = None     # ("entry", side, tier) | ("exit", reason)
    last_price = math.nan
    peak = initial_equity
    halted = False
    truncated = False
    equity_ts: list[int] = []
    equity: list[float] = []
    trades: list[Trade] = []
    halt_events: list[int] = []
    counters = {"entries": 0, "exit_target": 0, "exit_stop": 0, "exit_signal": 0,
                "exit_end_of_data": 0, "entries_blocked_halt": 0,
                "signal_exit_blocked_min_hold": 0}
    min_hold_ms = exec_cfg.signal_exit_min_hold * 60_000

    def open_position(ts: int, side: int, tier: int, price: float) -> None:
        nonlocal cash, position
        before = cash  # flat when entering
        qty = before * limits.fraction(tier) / price
        if qty <= 0:
            return
        fill = apply_fill(ts, "buy" if side == 0 else "sell", qty, price,
                          exec_cfg.fee_rate, slippage.draw())
        direction = 1 if side == 0 else -1
        cash += -direction * qty * fill.executed_price - fill.fee
        position = _Position(direction=direction, quantity=qty, entry=fill,
                             cash_before=before)
        counters["entries"] += 1

    def close_position(ts: int, price: float, reason: str) -> None:
        nonlocal cash, position
        assert position is not None
        side = "sell" if position.direction > 0 else "buy"
        fill = apply_fill(ts, side, position.quantity, price, exec_cfg.fee_rate,
                          slippage.draw())
        cash += position.direction * position.quantity * fill.executed_price - fill.fee
        # pnl as the exact flat-to-flat cash delta: trade pnls then telescope,
        # keeping the conservation identity tight over any trade count
        pnl = cash - position.cash_before
        trades.append(Trade(entry=position.entry, exit=fill,
                            direction=position.direction, pnl=pnl,
                            holding_time=ts - position.entry.ts))
        counters[f"exit_{reason}"] += 1
        position = None

    ts = 0
    try:
        for ts, price, action, tier in rows:
            ts = int(ts)
            have_price = not math.isnan(price)
            if have_price:
                last_price = price

            # 1. pending fills execute at this tick's reference price
            if pending is not None and have_price:
                kind = pending[0]
                if kind == "entry":
                    _, side, p_tier = pending
                    if position is None and not halted:
                        open_position(ts, side, p_tier, price)
                elif position is not None:
                    close_position(ts, price, pending[1])
                pending = None

            # 2. mark to market, drawdown monitoring
            eq = cash if position is None else \
                cash + position.direction * position.quantity * last_price
            equity_ts.append(ts)
            equity.append(eq)
            if eq > peak:
                peak = eq
            if not halted and (peak - eq) / peak > limits.max_drawdown_halt:
                halted = True
                halt_events.append(ts)
                if pending is not None and pending[0] == "entry":
                    pending = None

            # 3. exit monitoring against targets and stops
            if position is not None and have_price and pending is None:
                move = position.direction * (price / position.entry.executed_price - 1.0)
                if move >= limits.profit_target:
                    pending = ("exit", "target")
                elif move <= -limits.per_trade_stop:
                    pending = ("exit", "stop")

            # 4. decision processing
            if action in (ACT_BUY, ACT_SELL):
                direction = 1 if action == ACT_BUY else -1
                if position is not None and pending is None \
                        and direction != position.direction:
                    if ts - position.entry.ts >= min_hold_ms:
                        pending = ("exit", "signal")
                    else:
                        counters["signal_exit_blocked_min_hold"] += 1
                elif position is None and pending is None:
                    if halted:
                        counters["entries_blocked_halt"] += 1
                    else:
                        pending = ("entry", action, int(tier))
    except FeedError:
        truncated = True

    # flatten at the end so the conservation identity holds
    if position is not None and not math.isnan(last_price):
        close_position(ts, last_price, "end_of_data")
        if equity:
            equity[-1] = cash
    final = cash
    if not equity:
        equity_ts, equity = [0], [initial_equity]
    report = BacktestReport(initial_equity=initial_equity, final_equity=final,
                            equity_ts=np.asarray(equity_ts, dtype=np.int64),
                            equity=np.asarray(equity), trades=trades,
                            halt_events=halt_events, seed=seed,
                            intervals_per_year=exec_cfg.intervals_per_year,
                            truncated=truncated, counters=counters)
    report.self_check()
    return report
