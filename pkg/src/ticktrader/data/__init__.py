from .types import (Bar, FeedFrame, MarketContext, OnChainMetrics, OrderbookSnapshot,
                    SentimentPoint, TIMEFRAME_MS)
from .normalize import NormalizationSpec, normalize, denormalize
from .io import load_series, load_arrays, write_series
from .gaps import detect_gaps
from .feed import ReplayFeed, SimulatedLiveFeed, build_frames, next_frame

__all__ = [
    "Bar", "OrderbookSnapshot", "SentimentPoint", "OnChainMetrics", "MarketContext",
    "FeedFrame", "TIMEFRAME_MS", "NormalizationSpec", "normalize", "denormalize",
    "load_series", "load_arrays", "write_series", "detect_gaps",
    "ReplayFeed", "SimulatedLiveFeed", "build_frames", "next_frame",
]
