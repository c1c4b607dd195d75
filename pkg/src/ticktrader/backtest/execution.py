"""Fills with per-side fees and adverse slippage."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError


@dataclass(frozen=True)
class Fill:
    ts: int
    side: str            # "buy" | "sell"
    quantity: float
    reference_price: float
    executed_price: float
    fee: float

    def __post_init__(self):
        if self.side not in ("buy", "sell"):
            raise InputError(f"bad fill side {self.side!r}")
        if self.fee < 0 or self.executed_price <= 0 or self.quantity <= 0:
            raise InputError("fill fields out of range")
        # slippage is adverse by construction: buys pay up, sells receive less
        if self.side == "buy" and self.executed_price < self.reference_price - 1e-12:
            raise InputError("buy fill better than reference")
        if self.side == "sell" and self.executed_price > self.reference_price + 1e-12:
            raise InputError("sell fill better than reference")


def apply_fill(ts: int, side: str, quantity: float, reference_price: float,
               fee_rate: float, slippage_bps: float) -> Fill:
    """Execute at reference adjusted by adverse slippage; fee on executed notional."""
    if quantity <= 0 or reference_price <= 0:
        raise InputError("quantity and price must be positive")
    if fee_rate < 0 or slippage_bps < 0:
        raise InputError("fee rate and slippage must be nonnegative")
    adj = slippage_bps / 1e4
    executed = reference_price * (1.0 + adj if side == "buy" else 1.0 - adj)
    fee = fee_rate * quantity * executed
    return Fill(ts=ts, side=side, quantity=quantity, reference_price=reference_price,
                executed_price=executed, fee=fee)


class SlippageModel:
    """Half-normal adverse draws with a configurable mean, in basis points."""

    def __init__(self, mean_bps: float, seed: int):
        if mean_bps < 0:
            raise InputError("mean slippage must be nonnegative")
        self.mean_bps = mean_bps
        self._sigma = mean_bps * math.sqrt(math.pi / 2.0)
        self._rng = np.random.default_rng(seed)

    def draw(self) -> float:
        if self.mean_bps == 0.0:
            return 0.0
        return abs(float(self._rng.normal(0.0, self._sigma)))
