from .resample import resample, resample_arrays, moving_average
from .orderbook import OrderbookStats, orderbook_stats, snapshot_stats
from .assemble import (FeatureFrame, FeatureSchema, FrameAssembler, FrameUnavailable,
                       SeriesBundle, assemble_frame)

__all__ = [
    "resample", "resample_arrays", "moving_average",
    "OrderbookStats", "orderbook_stats", "snapshot_stats",
    "FeatureFrame", "FeatureSchema", "FrameAssembler", "FrameUnavailable",
    "SeriesBundle", "assemble_frame",
]
