"""Seeded synthetic market generator with a planted orderbook signal.

The plant: next-minute returns carry a component proportional to the
current book imbalance, scaled by signal_strength. Imbalance follows a
persistent AR(1), so the edge survives long enough to trade. Price drift
regimes switch slowly and leak into BTC dominance so the trend stage has
something real to learn. signal_strength 0 produces the same market with
the predictive component removed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import RunConfig, SynthConfig, derive_seed, write_config
from .data.io import write_series

MINUTE = 60_000
HOUR = 3_600_000
DAY = 86_400_000
BASE_TS = (1_700_000_000_000 // DAY) * DAY

BASE_VOLUME = 50.0
BASE_TX_COUNT = 3000.0
BASE_TX_VOLUME = 15_000.0
BASE_SP500 = 4500.0
BOOK_STEP_FRAC = 5e-5
BOOK_BASE_SIZE = 5.0


def generate(cfg: SynthConfig, seed: int, out_dir: str | Path,
             run_cfg: RunConfig | None = None) -> dict:
    """Write the five input files plus a ready-to-run config; returns stats.

    When the caller supplies its full run configuration, the emitted
    run.conf carries it forward so downstream commands see the same schema,
    thresholds, and execution settings.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(derive_seed(seed, "synth"))
    n = cfg.days * 1440
    ts = BASE_TS + np.arange(n, dtype=np.int64) * MINUTE

    # regime chain: -1 bear / 0 sideways / +1 bull, slow switching
    p_switch = 1.0 / (cfg.regime_switch_days * 1440.0)
    switches = rng.random(n) < p_switch
    states = rng.integers(-1, 2, size=int(switches.sum()) + 1)
    regime = states[np.cumsum(switches)].astype(np.int8)

    # persistent imbalance process, started from its stationary distribution
    phi = cfg.imbalance_phi
    shock = cfg.imbalance_std * np.sqrt(max(1.0 - phi * phi, 1e-9))
    eps = rng.normal(0.0, shock, size=n)
    imb = np.empty(n)
    imb[0] = rng.normal(0.0, cfg.imbalance_std)
    for t in range(1, n):
        imb[t] = phi * imb[t - 1] + eps[t]
    imb = np.clip(imb, -0.97, 0.97)

    # minute returns: regime drift + noise + lagged planted signal; both edge
    # components scale with signal_strength so strength 0 leaves pure noise.
    # the persistent signal would integrate into an unbounded price walk, so
    # log-price mean-reverts toward its anchor on a multi-day horizon
    noise = rng.normal(0.0, cfg.minute_vol, size=n)
    signal = np.zeros(n)
    signal[1:] = cfg.signal_strength * cfg.signal_vol_ratio * cfg.minute_vol * imb[:-1]
    base = cfg.signal_strength * cfg.regime_drift * regime + noise + signal
    dev = np.empty(n)
    level = 0.0
    pull = 1.0 - cfg.mean_reversion
    for t in range(n):
        level = pull * level + base[t]
        dev[t] = level
    close = cfg.price0 * np.exp(dev)
    rets = np.empty(n)
    rets[0] = dev[0]
    rets[1:] = close[1:] / close[:-1] - 1.0
    openp = np.r_[cfg.price0, close[:-1]]
    wick = np.abs(rng.normal(0.0, cfg.minute_vol / 2, size=n))
    high = np.maximum(openp, close) * (1.0 + wick)
    low = np.minimum(openp, close) * (1.0 - wick)
    activity = 1.0 + 2.0 * np.abs(rets) / cfg.minute_vol
    volume = BASE_VOLUME * activity * rng.lognormal(-0.125, 0.5, size=n)

    write_series(out / "bars.csv", "bars", {
        "ts": ts, "timeframe": np.array(["minute"] * n, dtype=object),
        "open": np.round(openp, 2), "high": np.round(high, 2),
        "low": np.round(low, 2), "close": np.round(close, 2),
        "volume": np.round(volume, 3)})

    _write_book(out / "book.jsonl", ts + MINUTE, close, imb, cfg, rng)

    sent_ts = BASE_TS + np.arange(0, n * MINUTE, 15 * MINUTE, dtype=np.int64)
    sent = np.empty(sent_ts.size)
    sent[0] = 0.0
    s_eps = rng.normal(0.0, 0.35, size=sent_ts.size)
    for t in range(1, sent_ts.size):
        sent[t] = 0.93 * sent[t - 1] + s_eps[t]
    write_series(out / "sentiment.csv", "sentiment",
                 {"ts": sent_ts, "score": np.round(sent, 4)})

    oc_ts = BASE_TS + np.arange(0, n * MINUTE, HOUR, dtype=np.int64)
    hours = oc_ts.size
    day_phase = 2.0 * np.pi * (oc_ts % DAY) / DAY
    regime_h = regime[np.minimum((oc_ts - BASE_TS) // MINUTE, n - 1)]
    tx_count = BASE_TX_COUNT * (1.0 + 0.3 * np.sin(day_phase)
                                + 0.1 * rng.normal(size=hours))
    tx_volume = BASE_TX_VOLUME * (1.0 + 0.25 * np.sin(day_phase) + 0.15 * regime_h
                                  + 0.1 * rng.normal(size=hours))
    write_series(out / "onchain.csv", "onchain", {
        "ts": oc_ts, "tx_count": np.round(np.maximum(tx_count, 0.0), 2),
        "tx_volume": np.round(np.maximum(tx_volume, 0.0), 2)})

    sp = BASE_SP500 * np.cumprod(1.0 + rng.normal(0.0, 3e-4, size=hours))
    dominance = np.clip(0.5 - 0.12 * regime_h + 0.02 * rng.normal(size=hours),
                        0.05, 0.95)
    write_series(out / "context.csv", "context", {
        "ts": oc_ts, "sp500": np.round(sp, 2),
        "btc_dominance": np.round(dominance, 4)})

    corr = _plant_correlation(imb, rets)
    stats = {"rows": n, "signal_strength": cfg.signal_strength,
             "imbalance_return_correlation": corr,
             "first_ts": int(ts[0]), "last_ts": int(ts[-1])}
    (out / "synth_stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    _write_run_config(out, cfg, seed, run_cfg)
    return stats


def _plant_correlation(imb: np.ndarray, rets: np.ndarray) -> float:
    """corr(imbalance, next-minute return) over the generated series."""
    a = imb[:-1]
    b = rets[1:]
    if a.size < 2 or a.std() == 0 or b.std() == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def _write_book(path: Path, ts: np.ndarray, close: np.ndarray, imb: np.ndarray,
                cfg: SynthConfig, rng: np.random.Generator) -> None:
    levels = cfg.book_levels
    n = ts.size
    offsets = np.arange(levels) + 0.5
    step = close[:, None] * BOOK_STEP_FRAC
    # price precision must resolve the tightest level spacing seen in the run
    decimals = max(2, int(np.ceil(-np.log10(step.min() / 4))))
    bid_px = np.round(close[:, None] - step * offsets, decimals)
    ask_px = np.round(close[:, None] + step * offsets, decimals)
    base = BOOK_BASE_SIZE * rng.lognormal(-0.02, 0.2, size=(n, 2, levels))
    bid_sz = np.round(base[:, 0] * (1.0 + imb)[:, None], 3)
    ask_sz = np.round(base[:, 1] * (1.0 - imb)[:, None], 3)
    ts_list = ts.tolist()
    with path.open("w") as fh:
        for i, (bp, bs, ap, asz) in enumerate(zip(bid_px.tolist(), bid_sz.tolist(),
                                                  ask_px.tolist(), ask_sz.tolist())):
            bids = ",".join(f"[{p},{s}]" for p, s in zip(bp, bs))
            asks = ",".join(f"[{p},{s}]" for p, s in zip(ap, asz))
            fh.write(f'{{"ts":{ts_list[i]},"bids":[{bids}],"asks":[{asks}]}}\n')


def _write_run_config(out: Path, cfg: SynthConfig, seed: int,
                      run_cfg: RunConfig | None) -> None:
    hour_vol = cfg.minute_vol * np.sqrt(60.0)
    day_vol = cfg.minute_vol * np.sqrt(1440.0)
    entries: list[tuple[str, object]] = [
        ("seed", seed),
        ("data.bars", "bars.csv"),
        ("data.book", "book.jsonl"),
        ("data.sentiment", "sentiment.csv"),
        ("data.onchain", "onchain.csv"),
        ("data.context", "context.csv"),
        ("norm.m.ret.scale", round(cfg.minute_vol, 6)),
        ("norm.h.ret.scale", round(hour_vol, 6)),
        ("norm.d.ret.scale", round(day_vol, 6)),
        ("norm.m.hl_range.center", round(cfg.minute_vol, 6)),
        ("norm.m.hl_range.scale", round(cfg.minute_vol, 6)),
        ("norm.h.hl_range.center", round(hour_vol, 6)),
        ("norm.h.hl_range.scale", round(hour_vol, 6)),
        ("norm.d.hl_range.center", round(day_vol, 6)),
        ("norm.d.hl_range.scale", round(day_vol, 6)),
        ("norm.volatility.realized.center", round(cfg.minute_vol, 6)),
        ("norm.volatility.realized.scale", round(cfg.minute_vol / 2, 6)),
        ("norm.trend.ma_daily.scale", round(2 * day_vol, 6)),
        ("norm.trend.ma_weekly.scale", round(5 * day_vol, 6)),
        ("norm.trend.ma_monthly.scale", round(10 * day_vol, 6)),
        ("synth.days", cfg.days),
        ("synth.signal_strength", cfg.signal_strength),
        ("synth.minute_vol", cfg.minute_vol),
    ]
    if run_cfg is not None:
        entries += _carried_settings(run_cfg)
    write_config(out / "run.conf", entries)


def _carried_settings(run_cfg: RunConfig) -> list[tuple[str, object]]:
    from dataclasses import fields
    s = run_cfg.schema
    entries: list[tuple[str, object]] = [
        ("model.preset", run_cfg.preset),
    ]
    for f in fields(s):
        value = getattr(s, f.name)
        if f.name == "trend_ma_windows":
            value = ",".join(str(v) for v in value)
        entries.append((f"schema.{f.name}", value))
    for section in ("engine", "exec", "risk", "train", "trend", "latency"):
        obj = getattr(run_cfg, section)
        for f in fields(obj):
            entries.append((f"{section}.{f.name}", getattr(obj, f.name)))
    return entries


def generate_from_run_config(cfg: RunConfig, out_dir: str | Path) -> dict:
    return generate(cfg.synth, cfg.seed, out_dir, run_cfg=cfg)
