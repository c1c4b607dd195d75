"""FeatureFrame assembly: per-head channel matrices, availability, batching.

A decision tick at timestamp T consumes only bars fully closed by T (the
newest minute bar is the one stamped T - 60s). Channel values are computed
positionally over present bars, so availability checks require the
indicator warmup span to be contiguous; any hole inside it marks the tick
as gapped rather than silently feeding indicators computed across the hole.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..data.io import load_arrays
from ..data.normalize import NormalizationSpec
from ..data.types import TIMEFRAME_MS
from ..errors import InputError
from .orderbook import rolling_window_max, snapshot_stats
from .resample import moving_average, resample_arrays

MINUTE = TIMEFRAME_MS["minute"]
HOUR = TIMEFRAME_MS["hour"]
DAY = TIMEFRAME_MS["day"]

BASE_CHANNELS = ("ret", "volume", "sma_fast", "sma_slow", "hl_range",
                 "onchain.tx_count", "onchain.tx_volume")
CONTEXT_CHANNELS = ("ctx.sp500", "ctx.btc_dominance")
OB_FEATURES = ("ob.biggest", "ob.max_gap", "ob.imbalance",
               "ob.biggest", "ob.max_gap", "ob.imbalance")  # minute then hour window

AVAILABLE = 0
INSUFFICIENT = 1
GAP = 2

REASONS = {INSUFFICIENT: "insufficient_history", GAP: "gap"}


@dataclass(frozen=True)
class FeatureSchema:
    lookback_minute: int = 60
    lookback_hour: int = 48
    lookback_day: int = 30
    sma_fast: int = 5
    sma_slow: int = 20
    sentiment_len: int = 10
    vol_window: int = 60
    trend_ma_windows: tuple[int, int, int] = (1, 7, 30)  # daily, weekly, monthly

    def channel_names(self, tf: str) -> list[str]:
        names = [f"{tf[0]}.{c}" if "." not in c else c for c in BASE_CHANNELS]
        if tf in ("hour", "day"):
            names += list(CONTEXT_CHANNELS)
        return names

    def lookback(self, tf: str) -> int:
        return {"minute": self.lookback_minute, "hour": self.lookback_hour,
                "day": self.lookback_day}[tf]

    def warmup_rows(self, tf: str) -> int:
        # oldest consumed row still needs sma_slow-1 prior rows (>= 1 for returns)
        return self.lookback(tf) + max(self.sma_slow - 1, 1)

    def head_shape(self, tf: str) -> tuple[int, int]:
        return (len(self.channel_names(tf)), self.lookback(tf))

    def schema_hash(self) -> str:
        payload = {
            "lookbacks": [self.lookback_minute, self.lookback_hour, self.lookback_day],
            "sma": [self.sma_fast, self.sma_slow],
            "sentiment_len": self.sentiment_len,
            "vol_window": self.vol_window,
            "trend_ma": list(self.trend_ma_windows),
            "channels": {tf: self.channel_names(tf) for tf in ("minute", "hour", "day")},
            "orderbook": list(OB_FEATURES),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class FrameUnavailable:
    ts: int
    reason: str
    detail: str = ""


@dataclass
class FeatureFrame:
    ts: int
    minute_head: np.ndarray      # (channels, lookback_minute)
    hour_head: np.ndarray        # (channels, lookback_hour)
    day_head: np.ndarray         # (channels, lookback_day)
    orderbook_vector: np.ndarray  # (6,)
    sentiment_window: np.ndarray  # (sentiment_len,)
    schema_hash: str = ""

    def validate(self, schema: FeatureSchema) -> None:
        if self.sentiment_window.shape != (schema.sentiment_len,):
            raise InputError(f"frame ts={self.ts}: sentiment window must have exactly "
                             f"{schema.sentiment_len} values")
        for name, arr, tf in (("minute_head", self.minute_head, "minute"),
                              ("hour_head", self.hour_head, "hour"),
                              ("day_head", self.day_head, "day")):
            if arr.shape != schema.head_shape(tf):
                raise InputError(f"frame ts={self.ts}: {name} shape {arr.shape} != "
                                 f"{schema.head_shape(tf)}")
        for name, arr in (("minute_head", self.minute_head),
                          ("hour_head", self.hour_head), ("day_head", self.day_head),
                          ("orderbook_vector", self.orderbook_vector),
                          ("sentiment_window", self.sentiment_window)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"frame ts={self.ts}: non-finite value in {name}")


@dataclass
class SeriesBundle:
    """Validated raw series as aligned arrays, ready for feature precompute."""

    minute_ts: np.ndarray
    m_open: np.ndarray
    m_high: np.ndarray
    m_low: np.ndarray
    m_close: np.ndarray
    m_volume: np.ndarray
    book_ts: np.ndarray
    book_biggest: np.ndarray
    book_gap: np.ndarray
    book_imbalance: np.ndarray
    sent_ts: np.ndarray
    sent_score: np.ndarray
    oc_ts: np.ndarray
    oc_count: np.ndarray
    oc_volume: np.ndarray
    ctx_ts: np.ndarray
    ctx_sp500: np.ndarray
    ctx_dominance: np.ndarray

    @classmethod
    def from_files(cls, paths: dict[str, str]) -> "SeriesBundle":
        bars = load_arrays(paths["bars"], "bars")
        if bars["ts"].size and not all(tf == "minute" for tf in bars["timeframe"]):
            raise InputError(f"{paths['bars']}: bundle requires minute bars")
        snaps = load_arrays(paths["book"], "book")
        stats = [snapshot_stats(s) for s in snaps]
        big = np.array([s[0] for s in stats])
        gap = np.array([s[1] for s in stats])
        bid_sum = np.array([s[2] for s in stats])
        ask_sum = np.array([s[3] for s in stats])
        total = bid_sum + ask_sum
        imb = np.divide(bid_sum - ask_sum, total, out=np.zeros_like(total),
                        where=total > 0)
        sent = load_arrays(paths["sentiment"], "sentiment")
        oc = load_arrays(paths["onchain"], "onchain")
        ctx = load_arrays(paths["context"], "context")
        return cls(
            minute_ts=bars["ts"], m_open=bars["open"], m_high=bars["high"],
            m_low=bars["low"], m_close=bars["close"], m_volume=bars["volume"],
            book_ts=np.array([s.ts for s in snaps], dtype=np.int64),
            book_biggest=big, book_gap=gap, book_imbalance=imb,
            sent_ts=sent["ts"], sent_score=sent["score"],
            oc_ts=oc["ts"], oc_count=oc["tx_count"], oc_volume=oc["tx_volume"],
            ctx_ts=ctx["ts"], ctx_sp500=ctx["sp500"], ctx_dominance=ctx["btc_dominance"],
        )


def _sample_last_at_or_before(src_ts: np.ndarray, src_val: np.ndarray,
                              at_ts: np.ndarray) -> np.ndarray:
    """Step-function sampling; NaN where no record exists yet."""
    idx = np.searchsorted(src_ts, at_ts, side="right") - 1
    out = np.full(at_ts.shape, np.nan)
    ok = idx >= 0
    out[ok] = src_val[idx[ok]]
    return out


class FrameAssembler:
    """Precomputes normalized channel matrices and serves frames by timestamp."""

    def __init__(self, bundle: SeriesBundle, schema: FeatureSchema,
                 norm: NormalizationSpec):
        self.bundle = bundle
        self.schema = schema
        self.norm = norm
        self.hash = schema.schema_hash()
        self._bars: dict[str, dict[str, np.ndarray]] = {}
        self._chan: dict[str, np.ndarray] = {}
        self._fvr: dict[str, int] = {}
        self._build_bars()
        for tf in ("minute", "hour", "day"):
            self._build_channels(tf)
        self._build_book()
        self._build_volatility()
        self._build_trend_features()
        self._sent_norm = np.asarray(norm.normalize("sentiment.score",
                                                    bundle.sent_score))

    # -- precompute ----------------------------------------------------------

    def _build_bars(self) -> None:
        b = self.bundle
        self._bars["minute"] = {"ts": b.minute_ts, "open": b.m_open, "high": b.m_high,
                                "low": b.m_low, "close": b.m_close,
                                "volume": b.m_volume}
        for tf in ("hour", "day"):
            ts, o, h, l, c, v, complete = resample_arrays(
                b.minute_ts, b.m_open, b.m_high, b.m_low, b.m_close, b.m_volume,
                source="minute", target=tf)
            self._bars[tf] = {"ts": ts, "open": o, "high": h, "low": l, "close": c,
                              "volume": v, "complete": complete}

    def _build_channels(self, tf: str) -> None:
        bars = self._bars[tf]
        ts, close = bars["ts"], bars["close"]
        n = ts.size
        names = self.schema.channel_names(tf)
        chan = np.full((n, len(names)), np.nan)
        if n:
            ret = np.full(n, np.nan)
            ret[1:] = close[1:] / close[:-1] - 1.0
            sf = np.full(n, np.nan)
            ss = np.full(n, np.nan)
            ma_f = moving_average(close, self.schema.sma_fast)
            ma_s = moving_average(close, self.schema.sma_slow)
            if ma_f.size:
                sf[self.schema.sma_fast - 1:] = ma_f / close[self.schema.sma_fast - 1:] - 1.0
            if ma_s.size:
                ss[self.schema.sma_slow - 1:] = ma_s / close[self.schema.sma_slow - 1:] - 1.0
            interval = TIMEFRAME_MS[tf]
            bucket_end = ts + interval - 1
            b = self.bundle
            cols = [ret, bars["volume"], sf, ss,
                    (bars["high"] - bars["low"]) / close,
                    _sample_last_at_or_before(b.oc_ts, b.oc_count, bucket_end),
                    _sample_last_at_or_before(b.oc_ts, b.oc_volume, bucket_end)]
            if tf in ("hour", "day"):
                cols.append(_sample_last_at_or_before(b.ctx_ts, b.ctx_sp500, bucket_end))
                cols.append(_sample_last_at_or_before(b.ctx_ts, b.ctx_dominance, bucket_end))
            for j, (name, col) in enumerate(zip(names, cols)):
                chan[:, j] = self.norm.normalize(name, col)
        self._chan[tf] = chan
        finite_rows = np.all(np.isfinite(chan), axis=1)
        valid = np.nonzero(finite_rows)[0]
        self._fvr[tf] = int(valid[0]) if valid.size else n

    def _build_book(self) -> None:
        b = self.bundle
        if b.book_ts.size:
            big_m = rolling_window_max(b.book_biggest, b.book_ts, MINUTE)
            gap_m = rolling_window_max(b.book_gap, b.book_ts, MINUTE)
            big_h = rolling_window_max(b.book_biggest, b.book_ts, HOUR)
            gap_h = rolling_window_max(b.book_gap, b.book_ts, HOUR)
            cols = [big_m, gap_m, b.book_imbalance, big_h, gap_h, b.book_imbalance]
        else:
            cols = [np.zeros(0)] * 6
        self._ob = np.stack([np.asarray(self.norm.normalize(name, col))
                             for name, col in zip(OB_FEATURES, cols)], axis=1)

    def _build_volatility(self) -> None:
        close = self.bundle.m_close
        n = close.size
        rv = np.full(n, np.nan)
        w = self.schema.vol_window
        if n > w:
            rets = close[1:] / close[:-1] - 1.0
            rv[w:] = sliding_window_view(rets, w).std(axis=1)
        self._vol_norm = np.asarray(self.norm.normalize("volatility.realized", rv))

    def _build_trend_features(self) -> None:
        d = self._bars["day"]
        n = d["ts"].size
        mas = {}
        for name, window in zip(("daily", "weekly", "monthly"),
                                self.schema.trend_ma_windows):
            arr = np.full(n, np.nan)
            ma = moving_average(d["close"], window)
            if ma.size:
                arr[window - 1:] = ma
            mas[name] = arr
        self._trend_ma = mas

    # -- availability --------------------------------------------------------

    def _tf_codes(self, tf: str, end_ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-tick availability code for one timeframe plus newest-row index."""
        bars_ts = self._bars[tf]["ts"]
        interval = TIMEFRAME_MS[tf]
        lookback = self.schema.lookback(tf)
        warm = self.schema.warmup_rows(tf)
        codes = np.zeros(end_ts.shape, dtype=np.int8)
        pos_end = np.searchsorted(bars_ts, end_ts, side="right") - 1
        if bars_ts.size == 0:
            return np.full(end_ts.shape, INSUFFICIENT, dtype=np.int8), pos_end
        first_ts = bars_ts[0]
        end_present = (pos_end >= 0) & (bars_ts[np.maximum(pos_end, 0)] == end_ts)
        span_start = end_ts - (warm - 1) * interval
        first_row = pos_end - warm + 1
        contiguous = end_present & (first_row >= 0)
        ok_rows = np.nonzero(contiguous)[0]
        if ok_rows.size:
            contiguous_vals = bars_ts[first_row[ok_rows]] == span_start[ok_rows]
            tmp = contiguous.copy()
            tmp[ok_rows] = contiguous_vals
            contiguous = tmp
        row_start = pos_end - lookback + 1
        enough_data = row_start >= self._fvr[tf]
        ok = contiguous & enough_data
        # classify failures: anything needing data earlier than we ever had is
        # warmup; holes inside an otherwise covered span are gaps
        insufficient = ~ok & ((span_start < first_ts) | ~enough_data)
        codes[~ok] = GAP
        codes[insufficient] = INSUFFICIENT
        return codes, pos_end

    def availability(self, ticks: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """Vectorized: returns (codes, index map) for an array of tick timestamps."""
        ticks = np.asarray(ticks, dtype=np.int64)
        b = self.bundle
        m_codes, m_pos = self._tf_codes("minute", ticks - MINUTE)
        h_codes, h_pos = self._tf_codes("hour", (ticks // HOUR) * HOUR - HOUR)
        d_codes, d_pos = self._tf_codes("day", (ticks // DAY) * DAY - DAY)

        s_idx = np.searchsorted(b.sent_ts, ticks, side="right") - 1
        s_codes = np.where(s_idx >= self.schema.sentiment_len - 1, AVAILABLE,
                           INSUFFICIENT).astype(np.int8)

        bk_idx = np.searchsorted(b.book_ts, ticks, side="right") - 1
        bk_codes = np.full(ticks.shape, AVAILABLE, dtype=np.int8)
        no_snap = bk_idx < 0
        stale = np.zeros(ticks.shape, dtype=bool)
        have = ~no_snap
        stale[have] = b.book_ts[bk_idx[have]] <= ticks[have] - MINUTE
        bk_codes[stale] = GAP
        bk_codes[no_snap] = INSUFFICIENT

        vol_ok = np.zeros(ticks.shape, dtype=bool)
        ok_pos = m_pos >= 0
        vol_ok[ok_pos] = np.isfinite(self._vol_norm[m_pos[ok_pos]])
        v_codes = np.where(vol_ok, AVAILABLE, INSUFFICIENT).astype(np.int8)

        # trend features: MAs over day bars plus latest context/onchain records
        trend_rows = max(self.schema.trend_ma_windows) - 1
        t_ok = d_pos >= trend_rows
        if b.ctx_ts.size and b.oc_ts.size:
            t_ok &= (ticks >= b.ctx_ts[0]) & (ticks >= b.oc_ts[0])
        else:
            t_ok &= False
        t_codes = np.where(t_ok, AVAILABLE, INSUFFICIENT).astype(np.int8)

        all_codes = np.stack([m_codes, h_codes, d_codes, s_codes, bk_codes, v_codes,
                              t_codes])
        codes = np.zeros(ticks.shape, dtype=np.int8)
        codes[np.any(all_codes == GAP, axis=0)] = GAP
        codes[np.any(all_codes == INSUFFICIENT, axis=0)] = INSUFFICIENT
        idx = {"minute": m_pos, "hour": h_pos, "day": d_pos, "sent": s_idx,
               "book": bk_idx}
        return codes, idx

    # -- frame construction --------------------------------------------------

    def _head_slice(self, tf: str, pos_end: int) -> np.ndarray:
        lookback = self.schema.lookback(tf)
        return self._chan[tf][pos_end - lookback + 1: pos_end + 1].T.copy()

    def frame_at(self, ts: int):
        """FeatureFrame at a tick, or FrameUnavailable with a machine reason."""
        ticks = np.array([ts], dtype=np.int64)
        codes, idx = self.availability(ticks)
        if codes[0] != AVAILABLE:
            return FrameUnavailable(ts=int(ts), reason=REASONS[int(codes[0])])
        s_idx = int(idx["sent"][0])
        frame = FeatureFrame(
            ts=int(ts),
            minute_head=self._head_slice("minute", int(idx["minute"][0])),
            hour_head=self._head_slice("hour", int(idx["hour"][0])),
            day_head=self._head_slice("day", int(idx["day"][0])),
            orderbook_vector=self._ob[int(idx["book"][0])].copy(),
            sentiment_window=self._sent_norm[s_idx - self.schema.sentiment_len + 1:
                                             s_idx + 1].copy(),
            schema_hash=self.hash,
        )
        frame.validate(self.schema)
        return frame

    def batch_inputs(self, ticks: np.ndarray, idx: dict[str, np.ndarray]) -> dict:
        """Gather model inputs for AVAILABLE ticks only (callers pre-filter)."""
        out = {}
        for tf, key in (("minute", "minute"), ("hour", "hour"), ("day", "day")):
            lookback = self.schema.lookback(tf)
            pos = idx[key]
            rows = pos[:, None] - lookback + 1 + np.arange(lookback)[None, :]
            out[tf] = self._chan[tf][rows].transpose(0, 2, 1)  # (B, C, L)
        out["ob"] = self._ob[idx["book"]]
        srows = idx["sent"][:, None] - self.schema.sentiment_len + 1 \
            + np.arange(self.schema.sentiment_len)[None, :]
        out["sentiment"] = self._sent_norm[srows]
        out["volatility"] = self._vol_norm[idx["minute"]]
        return out

    def trend_inputs(self, ticks: np.ndarray, idx: dict[str, np.ndarray]) -> np.ndarray:
        """(B, 5): dominance, tx volume, daily/weekly/monthly MA displacement."""
        b = self.bundle
        ticks = np.asarray(ticks, dtype=np.int64)
        dom = _sample_last_at_or_before(b.ctx_ts, b.ctx_dominance, ticks)
        txv = self.norm.normalize("trend.tx_volume",
                                  _sample_last_at_or_before(b.oc_ts, b.oc_volume, ticks))
        cur_close = self.bundle.m_close[idx["minute"]]
        cols = [dom, txv]
        for name in ("daily", "weekly", "monthly"):
            ma = self._trend_ma[name][idx["day"]]
            rel = ma / cur_close - 1.0
            cols.append(self.norm.normalize(f"trend.ma_{name}", rel))
        return np.stack(cols, axis=1)

    def ticks(self) -> np.ndarray:
        """Every expected decision boundary over the loaded minute span."""
        ts = self.bundle.minute_ts
        if ts.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.arange(ts[0] + MINUTE, ts[-1] + MINUTE + 1, MINUTE, dtype=np.int64)


def assemble_frame(ts: int, bundle: SeriesBundle, norm: NormalizationSpec,
                   schema: FeatureSchema):
    """One-shot assembly; FrameUnavailable is a result, not an exception."""
    return FrameAssembler(bundle, schema, norm).frame_at(ts)


def dump_frames(assembler: FrameAssembler, ticks, path) -> int:
    """Debug dump: named channels per frame, one JSON object per line."""
    count = 0
    with open(path, "w") as fh:
        for ts in ticks:
            frame = assembler.frame_at(int(ts))
            if isinstance(frame, FrameUnavailable):
                fh.write(json.dumps({"ts": int(ts), "unavailable": frame.reason}) + "\n")
                continue
            rec = {"ts": int(ts), "orderbook": frame.orderbook_vector.tolist(),
                   "sentiment": frame.sentiment_window.tolist()}
            for tf, head in (("minute", frame.minute_head), ("hour", frame.hour_head),
                             ("day", frame.day_head)):
                rec[tf] = {name: head[j].tolist()
                           for j, name in enumerate(assembler.schema.channel_names(tf))}
            fh.write(json.dumps(rec) + "\n")
            count += 1
    return count
