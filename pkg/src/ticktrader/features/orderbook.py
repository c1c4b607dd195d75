"""Running orderbook statistics: biggest resting order, level gaps, imbalance."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..data.types import OrderbookSnapshot
from ..errors import InputError


class InsufficientDataError(InputError):
    """Empty stats window; consumers treat this as a data gap."""


@dataclass(frozen=True)
class OrderbookStats:
    window: str  # "minute" | "hour"
    biggest_order_size: float
    max_gap: float
    bid_ask_imbalance: float

    def __post_init__(self):
        if self.biggest_order_size < 0 or self.max_gap < 0:
            raise InputError("orderbook stats must be nonnegative")
        if not -1.0 <= self.bid_ask_imbalance <= 1.0:
            raise InputError("imbalance outside [-1, 1]")


def snapshot_stats(snap: OrderbookSnapshot) -> tuple[float, float, float, float]:
    """(biggest size, max per-side adjacent gap, bid size sum, ask size sum)."""
    biggest = 0.0
    max_gap = 0.0
    bid_sum = 0.0
    ask_sum = 0.0
    for levels, acc in ((snap.bids, "bid"), (snap.asks, "ask")):
        prev_price = None
        for price, size in levels:
            if size > biggest:
                biggest = size
            if prev_price is not None:
                gap = abs(price - prev_price)
                if gap > max_gap:
                    max_gap = gap
            prev_price = price
            if acc == "bid":
                bid_sum += size
            else:
                ask_sum += size
    return biggest, max_gap, bid_sum, ask_sum


def imbalance_of(snap: OrderbookSnapshot) -> float:
    _, _, bid_sum, ask_sum = snapshot_stats(snap)
    total = bid_sum + ask_sum
    return (bid_sum - ask_sum) / total if total > 0 else 0.0


def orderbook_stats(snapshots: list[OrderbookSnapshot], window_kind: str) -> OrderbookStats:
    """Stats over every snapshot in the window; imbalance from the latest only."""
    if window_kind not in ("minute", "hour"):
        raise InputError(f"unknown stats window {window_kind!r}")
    if not snapshots:
        raise InsufficientDataError("no snapshots in window")
    biggest = 0.0
    max_gap = 0.0
    for snap in snapshots:
        b, g, _, _ = snapshot_stats(snap)
        biggest = max(biggest, b)
        max_gap = max(max_gap, g)
    return OrderbookStats(window=window_kind, biggest_order_size=biggest,
                          max_gap=max_gap,
                          bid_ask_imbalance=imbalance_of(snapshots[-1]))


def rolling_window_max(values: np.ndarray, ts: np.ndarray, span_ms: int) -> np.ndarray:
    """out[i] = max over j with ts[j] in (ts[i] - span, ts[i]]. Monotonic deque, O(n)."""
    n = values.size
    out = np.empty(n)
    dq: deque[int] = deque()
    left = 0
    for i in range(n):
        while dq and values[dq[-1]] <= values[i]:
            dq.pop()
        dq.append(i)
        while ts[left] <= ts[i] - span_ms:
            if dq[0] == left:
                dq.popleft()
            left += 1
        out[i] = values[dq[0]]
    return out
