"""Canonical time-stamped market input types.

Timestamps are UTC epoch milliseconds end to end. A bar with timestamp T
covers [T, T + interval); daily buckets cut at 00:00 UTC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import DataError

TIMEFRAME_MS = {
    "minute": 60_000,
    "hour": 3_600_000,
    "day": 86_400_000,
}


@dataclass(frozen=True)
class Bar:
    ts: int
    timeframe: str
    open: float
    high: float
    low: float
    close: float
    volume: float
    incomplete: bool = False  # lenient resample marks buckets missing minutes

    def validate(self) -> None:
        if self.timeframe not in TIMEFRAME_MS:
            raise DataError(f"bar ts={self.ts}: unknown timeframe {self.timeframe!r}")
        if self.ts % TIMEFRAME_MS[self.timeframe] != 0:
            raise DataError(f"bar ts={self.ts}: not aligned to {self.timeframe} boundary")
        if not (self.low <= self.open <= self.high
                and self.low <= self.close <= self.high):
            raise DataError(f"bar ts={self.ts}: OHLC ordering violated "
                            f"(field=open/high/low/close)")
        if self.volume < 0:
            raise DataError(f"bar ts={self.ts}: negative volume (field=volume)")
        for name in ("open", "high", "low", "close", "volume"):
            if not math.isfinite(getattr(self, name)):
                raise DataError(f"bar ts={self.ts}: non-finite {name} (field={name})")


@dataclass(frozen=True)
class OrderbookSnapshot:
    ts: int
    bids: tuple[tuple[float, float], ...]  # price descending
    asks: tuple[tuple[float, float], ...]  # price ascending

    def validate(self) -> None:
        if not self.bids or not self.asks:
            raise DataError(f"book ts={self.ts}: empty side (field=bids/asks)")
        if self.bids[0][0] >= self.asks[0][0]:
            raise DataError(f"book ts={self.ts}: crossed book (field=bids/asks)")
        for side, levels, sign in (("bids", self.bids, -1), ("asks", self.asks, 1)):
            prev = None
            for price, size in levels:
                if size <= 0:
                    raise DataError(f"book ts={self.ts}: non-positive size (field={side})")
                if price <= 0 or not math.isfinite(price) or not math.isfinite(size):
                    raise DataError(f"book ts={self.ts}: bad price (field={side})")
                if prev is not None and (price - prev) * sign <= 0:
                    raise DataError(f"book ts={self.ts}: {side} not sorted (field={side})")
                prev = price

    def best_bid(self) -> float:
        return self.bids[0][0]

    def best_ask(self) -> float:
        return self.asks[0][0]

    def mid(self) -> float:
        return 0.5 * (self.best_bid() + self.best_ask())


@dataclass(frozen=True)
class SentimentPoint:
    ts: int
    score: float

    def validate(self) -> None:
        if not math.isfinite(self.score):
            raise DataError(f"sentiment ts={self.ts}: non-finite score (field=score)")


@dataclass(frozen=True)
class OnChainMetrics:
    ts: int
    tx_count: float
    tx_volume: float

    def validate(self) -> None:
        if self.tx_count < 0 or self.tx_volume < 0:
            raise DataError(f"onchain ts={self.ts}: negative metric "
                            f"(field=tx_count/tx_volume)")


@dataclass(frozen=True)
class MarketContext:
    ts: int
    sp500_level: float
    btc_dominance: float

    def validate(self) -> None:
        if self.sp500_level <= 0:
            raise DataError(f"context ts={self.ts}: sp500 must be > 0 (field=sp500)")
        if not 0.0 <= self.btc_dominance <= 1.0:
            raise DataError(f"context ts={self.ts}: dominance outside [0,1] "
                            f"(field=btc_dominance)")


@dataclass
class FeedFrame:
    """One delivery unit. Exactly which payloads are present varies by source."""

    ts: int
    bar: Bar | None = None
    book: OrderbookSnapshot | None = None
    sentiment: SentimentPoint | None = None
    onchain: OnChainMetrics | None = None
    context: MarketContext | None = None
    delivery_ts: int = field(default=-1)

    def __post_init__(self):
        if self.delivery_ts < 0:
            self.delivery_ts = self.ts
        if not any((self.bar, self.book, self.sentiment, self.onchain, self.context)):
            raise DataError(f"frame ts={self.ts}: no payload present")

    def kind(self) -> str:
        for name in ("bar", "book", "sentiment", "onchain", "context"):
            if getattr(self, name) is not None:
                return name
        raise AssertionError("unreachable: empty frame")
