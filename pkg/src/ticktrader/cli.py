"""Operator entry point: validate | synth | train | backtest | ablation | latency | report.

Exit codes: 0 success, 2 validation findings, 3 I/O or parse failure,
4 missing prerequisite, 5 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline, synth
from .backtest.ablation import ablation_run, render_table
from .backtest.latency import measure_latency, render_latency
from .backtest.metrics import write_trades_csv
from .config import RunConfig, parse_config
from .data.gaps import detect_gaps
from .data.io import load_arrays
from .data.types import TIMEFRAME_MS
from .engine.decision import CLASS_NAMES
from .errors import ConfigError, DataError, InputError, ParseError, TraderError
from .models.direction import DirectionNetwork
from .models.trend import TrendNetwork

EXIT_OK = 0
EXIT_FINDINGS = 2
EXIT_IO = 3
EXIT_MISSING = 4
EXIT_INVARIANT = 5

REGIMES = ("bearish", "neutral", "bullish")


def _load_config(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = parse_config(args.config, overrides)
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(cfg: RunConfig) -> int:
    findings = 0
    for kind in ("bars", "book", "sentiment", "onchain", "context"):
        path = cfg.paths.get(kind)
        if path is None or not Path(path).exists():
            print(f"{kind}: MISSING ({path})")
            return EXIT_IO
        try:
            data = load_arrays(path, kind)
        except ParseError as exc:
            print(f"{kind}: PARSE ERROR: {exc}")
            return EXIT_IO
        except DataError as exc:
            print(f"{kind}: INVALID: {exc}")
            findings += 1
            continue
        if kind == "book":
            count = len(data)
            gaps = []
        else:
            count = int(data["ts"].size)
            if kind == "bars":
                gaps = detect_gaps(data["ts"], TIMEFRAME_MS["minute"])
            elif kind == "sentiment":
                gaps = detect_gaps(data["ts"], 15 * TIMEFRAME_MS["minute"])
            else:
                gaps = []
        findings += len(gaps)
        gap_text = ", ".join(f"[{a}..{b}]" for a, b in gaps[:5])
        more = f" (+{len(gaps) - 5} more)" if len(gaps) > 5 else ""
        print(f"{kind}: {count} records, {len(gaps)} gaps"
              + (f": {gap_text}{more}" if gaps else ""))
    if cfg.feed.drop_prob > 0 or cfg.feed.lag_ms_mean > 0:
        _report_feed_faults(cfg)
    print(f"validation findings: {findings}")
    return EXIT_FINDINGS if findings else EXIT_OK


def _report_feed_faults(cfg: RunConfig) -> None:
    """Replay the merged frame stream through the fault injector and report."""
    from .data.feed import SimulatedLiveFeed, build_frames
    from .data.io import load_series
    frames = build_frames(
        bars=load_series(cfg.paths["bars"], "bars"),
        books=load_series(cfg.paths["book"], "book"),
        sentiments=load_series(cfg.paths["sentiment"], "sentiment"),
        onchains=load_series(cfg.paths["onchain"], "onchain"),
        contexts=load_series(cfg.paths["context"], "context"))
    live = SimulatedLiveFeed(frames, drop_prob=cfg.feed.drop_prob,
                             lag_ms_mean=cfg.feed.lag_ms_mean,
                             lag_ms_std=cfg.feed.lag_ms_std, seed=cfg.feed.seed)
    delivered = len(live)
    lagged = sum(1 for f in live if f.delivery_ts > f.ts)
    print(f"feed simulation: {delivered}/{len(frames)} frames delivered "
          f"({len(frames) - delivered} dropped, {lagged} delayed; "
          f"drop_prob={cfg.feed.drop_prob}, lag={cfg.feed.lag_ms_mean}"
          f"+-{cfg.feed.lag_ms_std}ms, seed={cfg.feed.seed})")


def cmd_synth(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    stats = synth.generate(cfg.synth, cfg.seed, out, run_cfg=cfg)
    print(f"wrote {stats['rows']} minute bars and companion series to {out}")
    print(f"imbalance -> next-minute return correlation: "
          f"{stats['imbalance_return_correlation']:.4f} "
          f"(signal_strength {stats['signal_strength']})")
    print(f"run config: {out / 'run.conf'}")
    return EXIT_OK


def _checkpoint_paths(out: Path, cfg: RunConfig) -> dict:
    ckpt = out / "checkpoints"
    paths = {"trend": ckpt / "trend.ptnn"}
    for regime in REGIMES:
        for i in range(cfg.engine.models_per_regime):
            paths[f"direction_{regime}_{i}"] = ckpt / f"direction_{regime}_{i}.ptnn"
    return paths


def _missing_inputs(cfg: RunConfig) -> int | None:
    missing = [f"data.{kind}={p}" for kind, p in sorted(cfg.paths.items())
               if not Path(p).exists()]
    if not cfg.paths:
        missing = ["data.* paths not configured"]
    if missing:
        print(f"missing prerequisite data (run `trader synth` or point data.* at "
              f"real files): {missing[0]}")
        return EXIT_MISSING
    return None


def cmd_train(cfg: RunConfig) -> int:
    code = _missing_inputs(cfg)
    if code is not None:
        return code
    out = _out_dir(cfg)
    prep = pipeline.prepare(cfg)
    labels = pipeline.make_labels(prep, cfg)
    boundary = pipeline.oos_start_index(prep, cfg)
    trend_net = pipeline.train_trend_network(prep, cfg, cfg.seed, end_index=boundary)
    scores = pipeline.trend_scores(prep, trend_net)
    book, info = pipeline.train_direction_book(prep, scores, labels, cfg, cfg.seed,
                                               end_index=boundary)
    paths = _checkpoint_paths(out, cfg)
    paths["trend"].parent.mkdir(parents=True, exist_ok=True)
    trend_net.save(paths["trend"])
    for regime in REGIMES:
        for i, model in enumerate(book.models(regime)):
            model.save(paths[f"direction_{regime}_{i}"])
    summary = {"seed": cfg.seed, "trend_final_loss": trend_net.final_loss_,
               "regimes": info,
               "checkpoints": {k: str(v) for k, v in paths.items()}}
    (out / "train_summary.json").write_text(json.dumps(summary, indent=2,
                                                       default=float) + "\n")
    print(f"trend final loss: {trend_net.final_loss_:.5f}")
    for regime in REGIMES:
        d = info[regime]
        accs = ", ".join(f"{h['val_acc']:.3f}" for h in d["history"])
        pool = " (pooled fallback)" if d["fallback_pool"] else ""
        print(f"{regime}: {d['samples']} samples{pool}, val acc [{accs}]")
    print(f"checkpoints under {paths['trend'].parent}")
    return EXIT_OK


def _load_models(cfg: RunConfig, out: Path):
    paths = _checkpoint_paths(out, cfg)
    missing = [str(p) for p in paths.values() if not p.exists()]
    if missing:
        print(f"missing prerequisite artifacts (run `trader train` first): "
              f"{missing[0]}" + (f" (+{len(missing) - 1} more)" if len(missing) > 1
                                 else ""))
        return None
    trend_net = TrendNetwork.load(paths["trend"])
    lists = {}
    for regime in REGIMES:
        lists[regime] = [
            DirectionNetwork.load(paths[f"direction_{regime}_{i}"], schema=cfg.schema)
            for i in range(cfg.engine.models_per_regime)]
    from .engine.decision import RegimeBook
    book = RegimeBook(bearish=lists["bearish"], neutral=lists["neutral"],
                      bullish=lists["bullish"], t_bear=cfg.engine.t_bear,
                      t_bull=cfg.engine.t_bull)
    return trend_net, book


def _write_decisions_log(path: Path, decisions: pipeline.DecisionSet) -> None:
    with path.open("w") as fh:
        for i in range(decisions.ticks.size):
            models = []
            for j in range(decisions.classes.shape[1]):
                if decisions.classes[i, j] >= 0:
                    models.append({"class": CLASS_NAMES[decisions.classes[i, j]],
                                   "confidence": round(float(decisions.confs[i, j]), 6)})
            rec = {"ts": int(decisions.ticks[i]),
                   "regime": (REGIMES[decisions.regimes[i]]
                              if decisions.regimes[i] >= 0 else ""),
                   "models": models,
                   "consensus": round(float(decisions.consensus[i]), 6),
                   "final_confidence": round(float(decisions.final_confidence[i]), 6),
                   "action": ("buy", "sell", "hold", "no-action")[decisions.actions[i]],
                   "size_tier": ("large", "small", "none")[decisions.tiers[i]],
                   "reason": decisions.reason_name(i)}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def cmd_backtest(cfg: RunConfig) -> int:
    code = _missing_inputs(cfg)
    if code is not None:
        return code
    out = _out_dir(cfg)
    loaded = _load_models(cfg, out)
    if loaded is None:
        return EXIT_MISSING
    trend_net, book = loaded
    prep = pipeline.prepare(cfg)
    report, decisions, scores = pipeline.run_backtest(prep, book, trend_net, cfg,
                                                      cfg.seed)
    report.self_check()
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    write_trades_csv(out / "trades.csv", report.trades)
    ok = np.isfinite(scores)
    trend_lines = ["ts,score"] + [f"{int(t)},{s:.6f}" for t, s in
                                  zip(prep.ticks[ok], scores[ok])]
    (out / "trend.csv").write_text("\n".join(trend_lines) + "\n")
    if cfg.engine.log_decisions:
        _write_decisions_log(out / "decisions.jsonl", decisions)
    if cfg.features_dump_limit > 0:
        from .features.assemble import dump_frames
        avail = prep.ticks[prep.codes == 0][:cfg.features_dump_limit]
        dump_frames(prep.assembler, avail, out / "features.jsonl")
    m = report.metrics()
    pf = m["profit_factor"]
    pf_text = {"undefined": "n/a", "infinite": "inf"}.get(m["profit_factor_flag"],
                                                          f"{pf:.4f}" if pf else "n/a")
    print(f"ticks: {report.counters['ticks']}, trades: {m['trade_count']}")
    print(f"profit factor: {pf_text}  win rate: "
          + (f"{m['win_rate']:.4f}" if m["win_rate"] is not None else "n/a"))
    print(f"sharpe: " + (f"{m['sharpe']:.3f}" if m["sharpe"] is not None else "n/a")
          + f"  max drawdown: {m['max_drawdown']:.4f}")
    print(f"final equity: {report.final_equity:.2f} "
          f"(initial {report.initial_equity:.2f}), halts: {m['halt_count']}")
    print(f"report hash: {report.report_hash()}")
    print(f"artifacts under {out}")
    return EXIT_OK


def cmd_ablation(cfg: RunConfig) -> int:
    code = _missing_inputs(cfg)
    if code is not None:
        return code
    out = _out_dir(cfg)
    prep = pipeline.prepare(cfg)
    result, _ = ablation_run(prep, cfg, cfg.seed)
    (out / "ablation.json").write_text(json.dumps(result, indent=2) + "\n")
    print(render_table(result))
    failed = [r for r in result["rows"] if r["status"] != "ok"]
    return EXIT_OK if not failed else EXIT_INVARIANT


def cmd_latency(cfg: RunConfig) -> int:
    code = _missing_inputs(cfg)
    if code is not None:
        return code
    out = _out_dir(cfg)
    prep = pipeline.prepare(cfg)
    loaded = _load_models(cfg, out) if _checkpoint_paths(out, cfg)["trend"].exists() \
        else None
    if loaded is not None:
        models = loaded[1].neutral
    else:
        models = [DirectionNetwork(preset=cfg.preset, schema=cfg.schema,
                                   seed=cfg.seed + i).build()
                  for i in range(cfg.engine.models_per_regime)]
    avail = prep.ticks[prep.codes == 0]
    if avail.size == 0:
        print("no available ticks; not enough history in the dataset")
        return EXIT_MISSING
    sample = avail[np.linspace(0, avail.size - 1, min(64, avail.size)).astype(int)]
    result = measure_latency(prep.assembler, models, sample,
                             cfg.latency.repetitions,
                             cfg.latency.exchange_delay_ms, cfg.seed)
    (out / "latency.json").write_text(json.dumps(result, indent=2) + "\n")
    print(render_latency(result))
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    path = out / "report.json"
    if not path.exists():
        print(f"missing prerequisite artifact: {path} (run `trader backtest` first)")
        return EXIT_MISSING
    data = json.loads(path.read_text())
    m = data["metrics"]
    pf_text = {"undefined": "n/a", "infinite": "inf"}.get(
        m["profit_factor_flag"],
        f"{m['profit_factor']:.4f}" if m["profit_factor"] is not None else "n/a")
    print(f"seed {data['seed']}  ticks {data['counters'].get('ticks', '?')}  "
          f"trades {m['trade_count']}")
    print(f"profit factor {pf_text}  win rate "
          + (f"{m['win_rate']:.4f}" if m["win_rate"] is not None else "n/a"))
    print(f"sharpe " + (f"{m['sharpe']:.3f}" if m["sharpe"] is not None else "n/a")
          + f"  max drawdown {m['max_drawdown']:.4f}")
    print(f"equity {data['initial_equity']:.2f} -> {data['final_equity']:.2f}  "
          f"halts {m['halt_count']}  truncated {data['truncated']}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "synth": cmd_synth,
    "train": cmd_train,
    "backtest": cmd_backtest,
    "ablation": cmd_ablation,
    "latency": cmd_latency,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trader",
        description="Two-stage neural trading stack: data, training, backtesting.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="artifact directory")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}")
        return EXIT_IO
    try:
        return COMMANDS[args.command](cfg)
    except ParseError as exc:
        print(f"parse error: {exc}")
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}")
        return EXIT_IO
    except (DataError, InputError) as exc:
        print(f"invariant failure: {exc}")
        return EXIT_INVARIANT
    except TraderError as exc:
        print(f"error: {exc}")
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}")
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
