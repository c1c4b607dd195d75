"""Attention vs no-attention comparison harness.

Both variants train on identical data with identical seeds; the table
reports profit factor, mean ensemble confidence, and trade count per
variant, and every profit factor cell is re-derived from that variant's
logged trades before the table is emitted.
"""

from __future__ import annotations

import math

from ..config import RunConfig
from ..errors import InputError
from ..pipeline import (Prepared, make_labels, oos_start_index, predict_decisions,
                        run_decision_ledger, thresholds_from, train_direction_book,
                        train_trend_network, trend_scores)
from .metrics import pf_flag, profit_factor

VARIANTS = (("attention", True), ("no_attention", False))


def ablation_run(prep: Prepared, cfg: RunConfig, seed: int,
                 ) -> tuple[dict, dict]:
    """Train and backtest both variants on identical data and seeds.

    Returns (table, reports): the serializable comparison table plus each
    variant's full BacktestReport so callers can re-derive every cell.
    """
    labels = make_labels(prep, cfg)
    boundary = oos_start_index(prep, cfg)
    trend_net = train_trend_network(prep, cfg, seed, end_index=boundary)
    scores = trend_scores(prep, trend_net)
    reports = {}
    rows = []
    for name, use_attention in VARIANTS:
        try:
            book, _ = train_direction_book(prep, scores, labels, cfg, seed,
                                           use_attention=use_attention,
                                           end_index=boundary)
            decisions = predict_decisions(prep, book, scores, thresholds_from(cfg),
                                          start=boundary)
            report = run_decision_ledger(prep, decisions, cfg, seed, start=boundary)
            reports[name] = report
            pf = profit_factor(report.trades)
            # the emitted cell must match a plain re-summation of the trade log
            gains = sum(t.pnl for t in report.trades if t.pnl > 0)
            losses = -sum(t.pnl for t in report.trades if t.pnl < 0)
            if pf is not None and not math.isinf(pf) and losses > 0:
                if abs(pf - gains / losses) > 1e-9:
                    raise InputError("profit factor does not match its trade list")
            evaluated = decisions.regimes >= 0
            mean_conf = (float(decisions.final_confidence[evaluated].mean())
                         if evaluated.any() else 0.0)
            rows.append({
                "variant": name,
                "status": "ok",
                "profit_factor": None if pf is None or math.isinf(pf) else pf,
                "profit_factor_flag": pf_flag(pf),
                "mean_confidence": mean_conf,
                "trade_count": report.trade_count,
                "win_rate": report.metrics()["win_rate"],
            })
        except Exception as exc:  # a failed variant marks its row, run continues
            rows.append({"variant": name, "status": f"failed: {exc}",
                         "profit_factor": None, "profit_factor_flag": "undefined",
                         "mean_confidence": None, "trade_count": 0,
                         "win_rate": None})
    return {"seed": seed, "rows": rows}, reports


def render_table(result: dict) -> str:
    lines = [
        f"{'Architecture':<24} {'Profit Factor':>14} {'Mean Conf':>10} {'Trades':>8}",
        "-" * 60,
    ]
    label = {"attention": "CNN + Soft Attention", "no_attention": "CNN without Attention"}
    for row in result["rows"]:
        if row["status"] != "ok":
            lines.append(f"{label[row['variant']]:<24} {'failed':>14}")
            continue
        pf = row["profit_factor"]
        pf_text = {"undefined": "n/a", "infinite": "inf"}.get(
            row["profit_factor_flag"], f"{pf:.3f}" if pf is not None else "n/a")
        conf = row["mean_confidence"]
        lines.append(f"{label[row['variant']]:<24} {pf_text:>14} {conf:>10.3f} "
                     f"{row['trade_count']:>8}")
    return "\n".join(lines)
