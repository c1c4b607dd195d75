"""Trades, the metric suite, and the self-checking backtest report."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from .execution import Fill


@dataclass(frozen=True)
class Trade:
    entry: Fill
    exit: Fill
    direction: int        # +1 long, -1 short
    pnl: float
    holding_time: int     # ms

    def __post_init__(self):
        if self.exit.ts < self.entry.ts:
            raise InputError("trade exits before it enters")
        expected = (self.direction * (self.exit.executed_price - self.entry.executed_price)
                    * self.entry.quantity - self.entry.fee - self.exit.fee)
        # 1e-9 absolute at desk notionals; relative once compounding grows them
        tol = max(1e-9, 1e-13 * self.entry.quantity * self.entry.executed_price)
        if abs(expected - self.pnl) > tol:
            raise InputError(f"pnl {self.pnl} inconsistent with fills ({expected})")


def profit_factor(trades: list[Trade]) -> float | None:
    """Gross profit over gross loss. None when no trades; inf when no losers."""
    if not trades:
        return None
    gains = sum(t.pnl for t in trades if t.pnl > 0)
    losses = sum(-t.pnl for t in trades if t.pnl < 0)
    if losses == 0.0:
        return math.inf
    return gains / losses


def pf_flag(value: float | None) -> str:
    if value is None:
        return "undefined"
    if math.isinf(value):
        return "infinite"
    return "normal"


def win_rate(trades: list[Trade]) -> float | None:
    if not trades:
        return None
    return sum(1 for t in trades if t.pnl > 0) / len(trades)


def max_drawdown(equity: np.ndarray) -> float:
    """Largest peak-to-trough fractional decline."""
    eq = np.asarray(equity, dtype=np.float64)
    if eq.size == 0:
        raise InputError("empty equity curve")
    peaks = np.maximum.accumulate(eq)
    return float(np.max((peaks - eq) / peaks))


def sharpe(equity: np.ndarray, intervals_per_year: float) -> tuple[float | None, str]:
    """Annualized mean/std of per-interval returns; flagged when variance is zero."""
    eq = np.asarray(equity, dtype=np.float64)
    if eq.size < 2:
        return None, "undefined"
    rets = eq[1:] / eq[:-1] - 1.0
    std = float(rets.std())
    if std == 0.0:
        return None, "zero_variance"
    return float(rets.mean() / std * math.sqrt(intervals_per_year)), "normal"


@dataclass
class BacktestReport:
    initial_equity: float
    final_equity: float
    equity_ts: np.ndarray
    equity: np.ndarray
    trades: list[Trade]
    halt_events: list[int]
    seed: int
    intervals_per_year: float
    truncated: bool = False
    counters: dict = field(default_factory=dict)

    @property
    def trade_count(self) -> int:
        return len(self.trades)

    def metrics(self) -> dict:
        pf = profit_factor(self.trades)
        sh, sh_flag = sharpe(self.equity, self.intervals_per_year)
        return {
            "profit_factor": None if pf is None or math.isinf(pf) else pf,
            "profit_factor_flag": pf_flag(pf),
            "sharpe": sh,
            "sharpe_flag": sh_flag,
            "max_drawdown": max_drawdown(self.equity),
            "win_rate": win_rate(self.trades),
            "trade_count": self.trade_count,
            "halt_count": len(self.halt_events),
        }

    def self_check(self) -> None:
        """Ledger conservation and metric recomputability from the trade list."""
        pnl_sum = math.fsum(t.pnl for t in self.trades)
        if abs(self.final_equity - (self.initial_equity + pnl_sum)) > 1e-9:
            raise InputError(
                f"ledger leak: final {self.final_equity} != initial "
                f"{self.initial_equity} + pnl {pnl_sum}")
        if abs(self.equity[-1] - self.final_equity) > 1e-9:
            raise InputError("equity curve does not end at final equity")

    def to_dict(self) -> dict:
        return {
            "initial_equity": self.initial_equity,
            "final_equity": self.final_equity,
            "seed": self.seed,
            "truncated": self.truncated,
            "metrics": self.metrics(),
            "counters": self.counters,
            "halt_events": list(self.halt_events),
            "equity_ts": [int(t) for t in self.equity_ts],
            "equity": [float(e) for e in self.equity],
            "trades": [
                {"entry_ts": t.entry.ts, "exit_ts": t.exit.ts,
                 "side": "long" if t.direction > 0 else "short",
                 "qty": t.entry.quantity,
                 "entry_px": t.entry.executed_price,
                 "exit_px": t.exit.executed_price,
                 "fees": t.entry.fee + t.exit.fee,
                 "pnl": t.pnl,
                 "holding_ms": t.holding_time}
                for t in self.trades
            ],
        }

    def report_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True,
                          default=lambda x: repr(x)).encode()
        return hashlib.sha256(blob).hexdigest()


def write_trades_csv(path, trades: list[Trade]) -> None:
    lines = ["entry_ts,exit_ts,side,qty,entry_px,exit_px,fees,pnl"]
    for t in trades:
        side = "long" if t.direction > 0 else "short"
        lines.append(f"{t.entry.ts},{t.exit.ts},{side},{t.entry.quantity!r},"
                     f"{t.entry.executed_price!r},{t.exit.executed_price!r},"
                     f"{(t.entry.fee + t.exit.fee)!r},{t.pnl!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
