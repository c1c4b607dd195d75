from .execution import Fill, SlippageModel, apply_fill
from .metrics import (BacktestReport, Trade, max_drawdown, profit_factor, sharpe,
                      win_rate)
from .simulator import RiskLimits, run_ledger

__all__ = [
    "Fill", "SlippageModel", "apply_fill", "BacktestReport", "Trade",
    "max_drawdown", "profit_factor", "sharpe", "win_rate", "RiskLimits",
    "run_ledger",
]
