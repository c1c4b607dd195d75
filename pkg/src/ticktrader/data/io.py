"""Flat-file loading and writing for the five input kinds.

CSV kinds carry an exact header line; book snapshots are JSON lines.
Loading validates every record; a series is either fully valid or the
load fails with row context.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError, ParseError
from .types import (Bar, MarketContext, OnChainMetrics, OrderbookSnapshot,
                    SentimentPoint, TIMEFRAME_MS)

CSV_HEADERS = {
    "bars": "ts,timeframe,open,high,low,close,volume",
    "sentiment": "ts,score",
    "onchain": "ts,tx_count,tx_volume",
    "context": "ts,sp500,btc_dominance",
}

KINDS = ("bars", "book", "sentiment", "onchain", "context")


def _read_lines(path: Path) -> list[str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc})") from exc
    return text.splitlines()


def _check_monotone(ts: np.ndarray, path: Path, strict: bool = True) -> None:
    if ts.size < 2:
        return
    diffs = np.diff(ts)
    bad = np.nonzero(diffs <= 0 if strict else diffs < 0)[0]
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{path}: non-monotone timestamp at row {i + 2} "
                        f"({ts[i]} -> {ts[i + 1]})")


def _parse_csv(path: Path, kind: str) -> dict[str, np.ndarray]:
    lines = _read_lines(path)
    header = CSV_HEADERS[kind]
    cols = header.split(",")
    if not lines:
        return {c: np.zeros(0) for c in cols}
    if lines[0].strip() != header:
        raise ParseError(f"{path}: line 1: expected header {header!r}")
    rows = [ln for ln in lines[1:] if ln.strip()]
    out: dict[str, list] = {c: [] for c in cols}
    for lineno, ln in enumerate(rows, start=2):
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise ParseError(f"{path}: line {lineno}: expected {len(cols)} fields, "
                             f"got {len(parts)}")
        for c, raw in zip(cols, parts):
            if c == "timeframe":
                out[c].append(raw)
                continue
            try:
                out[c].append(int(raw) if c == "ts" else float(raw))
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad value {raw!r} "
                                 f"for field {c}") from None
    arrays: dict[str, np.ndarray] = {}
    for c in cols:
        if c == "timeframe":
            arrays[c] = np.array(out[c], dtype=object)
        elif c == "ts":
            arrays[c] = np.array(out[c], dtype=np.int64)
        else:
            arrays[c] = np.array(out[c], dtype=np.float64)
    return arrays


def _validate_bars(arrays: dict[str, np.ndarray], path: Path) -> None:
    ts = arrays["ts"]
    if ts.size == 0:
        return
    o, h, l, c, v = (arrays[k] for k in ("open", "high", "low", "close", "volume"))
    ok = (l <= o) & (o <= h) & (l <= c) & (c <= h) & (v >= 0)
    finite = np.isfinite(o) & np.isfinite(h) & np.isfinite(l) & np.isfinite(c) & np.isfinite(v)
    bad = np.nonzero(~(ok & finite))[0]
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{path}: row {i + 2} (ts={ts[i]}): OHLCV invariant violated "
                        f"(field=open/high/low/close/volume)")
    for i, tf in enumerate(arrays["timeframe"]):
        if tf not in TIMEFRAME_MS:
            raise DataError(f"{path}: row {i + 2}: unknown timeframe {tf!r}")
    intervals = np.array([TIMEFRAME_MS[tf] for tf in arrays["timeframe"]], dtype=np.int64)
    misaligned = np.nonzero(ts % intervals != 0)[0]
    if misaligned.size:
        i = int(misaligned[0])
        raise DataError(f"{path}: row {i + 2} (ts={ts[i]}): timestamp not aligned "
                        f"to its timeframe (field=ts)")


def _validate_simple(arrays: dict[str, np.ndarray], path: Path, kind: str) -> None:
    ts = arrays["ts"]
    if ts.size == 0:
        return
    if kind == "onchain":
        bad = np.nonzero((arrays["tx_count"] < 0) | (arrays["tx_volume"] < 0))[0]
        field = "tx_count/tx_volume"
    elif kind == "context":
        bad = np.nonzero((arrays["sp500"] <= 0)
                         | (arrays["btc_dominance"] < 0)
                         | (arrays["btc_dominance"] > 1))[0]
        field = "sp500/btc_dominance"
    else:  # sentiment
        bad = np.nonzero(~np.isfinite(arrays["score"]))[0]
        field = "score"
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{path}: row {i + 2} (ts={ts[i]}): invariant violated "
                        f"(field={field})")


def _load_book(path: Path) -> list[OrderbookSnapshot]:
    snaps = []
    for lineno, ln in enumerate(_read_lines(path), start=1):
        if not ln.strip():
            continue
        try:
            rec = json.loads(ln)
            snap = OrderbookSnapshot(
                ts=int(rec["ts"]),
                bids=tuple((float(p), float(s)) for p, s in rec["bids"]),
                asks=tuple((float(p), float(s)) for p, s in rec["asks"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: line {lineno}: bad snapshot ({exc})") from None
        try:
            snap.validate()
        except DataError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
        snaps.append(snap)
    ts = np.array([s.ts for s in snaps], dtype=np.int64)
    _check_monotone(ts, path)
    return snaps


def load_arrays(path: str | Path, kind: str):
    """Parse + validate; returns column arrays (csv kinds) or snapshots (book)."""
    path = Path(path)
    if kind not in KINDS:
        raise ParseError(f"unknown series kind {kind!r}")
    if kind == "book":
        return _load_book(path)
    arrays = _parse_csv(path, kind)
    if kind == "bars":
        _validate_bars(arrays, path)
    else:
        _validate_simple(arrays, path, kind)
    _check_monotone(arrays["ts"], path)
    return arrays


def load_series(path: str | Path, kind: str) -> list:
    """Typed, validated, strictly time-ordered records."""
    data = load_arrays(path, kind)
    if kind == "book":
        return data
    ts = data["ts"]
    if kind == "bars":
        return [Bar(int(ts[i]), str(data["timeframe"][i]), float(data["open"][i]),
                    float(data["high"][i]), float(data["low"][i]),
                    float(data["close"][i]), float(data["volume"][i]))
                for i in range(ts.size)]
    if kind == "sentiment":
        return [SentimentPoint(int(ts[i]), float(data["score"][i]))
                for i in range(ts.size)]
    if kind == "onchain":
        return [OnChainMetrics(int(ts[i]), float(data["tx_count"][i]),
                               float(data["tx_volume"][i])) for i in range(ts.size)]
    return [MarketContext(int(ts[i]), float(data["sp500"][i]),
                          float(data["btc_dominance"][i])) for i in range(ts.size)]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series(path: str | Path, kind: str, records) -> int:
    """Write records (typed objects, or column arrays for csv kinds). Returns count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if kind == "book":
        with path.open("w") as fh:
            for s in records:
                fh.write(json.dumps({"ts": s.ts,
                                     "bids": [[p, q] for p, q in s.bids],
                                     "asks": [[p, q] for p, q in s.asks]}) + "\n")
        return len(records)

    header = CSV_HEADERS[kind]
    cols = header.split(",")
    if isinstance(records, dict):
        n = len(records["ts"])
        lines = [header]
        for i in range(n):
            parts = []
            for c in cols:
                v = records[c][i]
                if c == "ts":
                    parts.append(str(int(v)))
                elif c == "timeframe":
                    parts.append(str(v))
                else:
                    parts.append(_fmt(v))
            lines.append(",".join(parts))
        path.write_text("\n".join(lines) + "\n")
        return n

    field_map = {
        "bars": lambda b: [str(b.ts), b.timeframe, _fmt(b.open), _fmt(b.high),
                           _fmt(b.low), _fmt(b.close), _fmt(b.volume)],
        "sentiment": lambda p: [str(p.ts), _fmt(p.score)],
        "onchain": lambda m: [str(m.ts), _fmt(m.tx_count), _fmt(m.tx_volume)],
        "context": lambda c: [str(c.ts), _fmt(c.sp500_level), _fmt(c.btc_dominance)],
    }[kind]
    lines = [header] + [",".join(field_map(r)) for r in records]
    path.write_text("\n".join(lines) + "\n")
    return len(lines) - 1
