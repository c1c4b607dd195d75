"""Timeframe aggregation and trailing moving averages."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..data.types import Bar, TIMEFRAME_MS
from ..errors import InputError

_NEXT = {"minute": ("hour", "day"), "hour": ("day",)}


def resample_arrays(ts, o, h, l, c, v, source: str, target: str,
                    source_complete=None):
    """Aggregate aligned OHLCV arrays into target buckets.

    Returns (ts, open, high, low, close, volume, complete). A bucket is
    complete when every constituent source bar is present (and itself
    complete). open = first, close = last, high = max, low = min,
    volume = sum.
    """
    if target not in TIMEFRAME_MS or source not in TIMEFRAME_MS:
        raise InputError(f"unknown timeframe {source!r} -> {target!r}")
    if TIMEFRAME_MS[target] <= TIMEFRAME_MS[source]:
        raise InputError(f"cannot resample {source} into {target}")
    ts = np.asarray(ts, dtype=np.int64)
    if ts.size == 0:
        z = np.zeros(0)
        return ts, z, z, z, z, z, np.zeros(0, dtype=bool)
    interval = TIMEFRAME_MS[target]
    bucket = ts // interval * interval
    starts = np.nonzero(np.r_[True, bucket[1:] != bucket[:-1]])[0]
    ends = np.r_[starts[1:], ts.size]
    out_ts = bucket[starts]
    out_o = np.asarray(o)[starts]
    out_c = np.asarray(c)[ends - 1]
    out_h = np.maximum.reduceat(np.asarray(h), starts)
    out_l = np.minimum.reduceat(np.asarray(l), starts)
    out_v = np.add.reduceat(np.asarray(v), starts)
    expected = interval // TIMEFRAME_MS[source]
    complete = (ends - starts) == expected
    if source_complete is not None:
        all_complete = np.logical_and.reduceat(np.asarray(source_complete, dtype=bool),
                                               starts)
        complete &= all_complete
    return out_ts, out_o, out_h, out_l, out_c, out_v, complete


def resample(bars: list[Bar], target: str, lenient: bool = False) -> list[Bar]:
    """Aggregate a time-ordered bar series into hour or day bars.

    Strict mode drops buckets with any missing constituent; lenient mode
    keeps them flagged incomplete.
    """
    if not bars:
        return []
    source = bars[0].timeframe
    if any(b.timeframe != source for b in bars):
        raise InputError("mixed source timeframes")
    if target not in _NEXT.get(source, ()):
        raise InputError(f"cannot resample {source} bars into {target}")
    ts = np.array([b.ts for b in bars], dtype=np.int64)
    cols = [np.array([getattr(b, k) for b in bars]) for k in
            ("open", "high", "low", "close", "volume")]
    src_complete = np.array([not b.incomplete for b in bars])
    out_ts, o, h, l, c, v, complete = resample_arrays(
        ts, *cols, source=source, target=target, source_complete=src_complete)
    out = []
    for i in range(out_ts.size):
        if not complete[i] and not lenient:
            continue
        out.append(Bar(int(out_ts[i]), target, float(o[i]), float(h[i]), float(l[i]),
                       float(c[i]), float(v[i]), incomplete=not complete[i]))
    return out


def moving_average(series, window: int) -> np.ndarray:
    """Trailing simple mean; defined from index window-1 onward.

    A window longer than the series yields an empty result.
    """
    if window < 1:
        raise InputError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    if x.size < window:
        return np.zeros(0)
    return sliding_window_view(x, window).mean(axis=1)
