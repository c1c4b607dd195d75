"""Two-stage neural trading stack: trend-gated attention ensembles, tick backtester."""

__version__ = "0.1.0"
