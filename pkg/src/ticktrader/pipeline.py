"""End-to-end orchestration: data -> features -> training -> decisions -> ledger.

Everything here is deterministic under the run seed. Model predictions do
not depend on fills, so the per-tick prediction pass is batched up front
and the sequential ledger replays over precomputed decision arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backtest.metrics import BacktestReport
from .backtest.simulator import RiskLimits, run_ledger
from .config import RunConfig, derive_seed
from .engine.decision import (RegimeBook, ThresholdConfig, decisions_vectorized)
from .errors import InputError
from .features.assemble import (AVAILABLE, GAP, INSUFFICIENT, FrameAssembler,
                                SeriesBundle)
from .models.direction import DirectionNetwork
from .models.trend import TrendNetwork

MINUTE = 60_000

REGIME_NAMES = ("bearish", "neutral", "bullish")


@dataclass
class Prepared:
    bundle: SeriesBundle
    assembler: FrameAssembler
    ticks: np.ndarray
    codes: np.ndarray
    idx: dict[str, np.ndarray]
    prices: np.ndarray  # reference price at each tick; NaN where the bar is missing


def prepare(cfg: RunConfig) -> Prepared:
    bundle = SeriesBundle.from_files(cfg.paths)
    assembler = FrameAssembler(bundle, cfg.schema, cfg.norm_spec())
    ticks = assembler.ticks()
    codes, idx = assembler.availability(ticks)
    pos = idx["minute"]
    prices = np.full(ticks.shape, np.nan)
    ok = pos >= 0
    ok[ok] = bundle.minute_ts[pos[ok]] == ticks[ok] - MINUTE
    prices[ok] = bundle.m_close[pos[ok]]
    return Prepared(bundle=bundle, assembler=assembler, ticks=ticks, codes=codes,
                    idx=idx, prices=prices)


def forward_returns(prep: Prepared, horizon_minutes: int) -> np.ndarray:
    """Return over (tick, tick + horizon]; NaN when either endpoint bar is missing."""
    future = prep.ticks + horizon_minutes * MINUTE
    ts = prep.bundle.minute_ts
    pos = np.searchsorted(ts, future - MINUTE)
    out = np.full(prep.ticks.shape, np.nan)
    ok = (pos < ts.size)
    ok[ok] &= ts[pos[ok]] == future[ok] - MINUTE
    ok &= np.isfinite(prep.prices)
    out[ok] = prep.bundle.m_close[pos[ok]] / prep.prices[ok] - 1.0
    return out


def minute_return_std(prep: Prepared) -> float:
    rets = prep.bundle.m_close[1:] / prep.bundle.m_close[:-1] - 1.0
    return float(np.std(rets))


def make_labels(prep: Prepared, cfg: RunConfig) -> np.ndarray:
    """Class labels per tick (-1 where the forward window is unavailable)."""
    horizon = cfg.train.label_horizon
    fwd = forward_returns(prep, horizon)
    theta = cfg.train.label_threshold_sigmas * minute_return_std(prep) * np.sqrt(horizon)
    labels = np.full(prep.ticks.shape, -1, dtype=np.int8)
    ok = np.isfinite(fwd)
    labels[ok & (fwd > theta)] = 0        # buy
    labels[ok & (fwd < -theta)] = 1       # sell
    labels[ok & (np.abs(fwd) <= theta)] = 2
    return labels


def _subsample(indices: np.ndarray, stride: int, cap: int,
               rng: np.random.Generator) -> np.ndarray:
    picked = indices[::max(stride, 1)]
    if picked.size > cap:
        picked = picked[np.sort(rng.choice(picked.size, size=cap, replace=False))]
    return picked


def oos_start_index(prep: Prepared, cfg: RunConfig) -> int:
    """First tick index of the out-of-sample segment.

    Training sees only ticks before it (minus a label-horizon embargo); the
    ledger replays from it. split_fraction 0 disables the holdout.
    """
    frac = cfg.train.split_fraction
    if frac <= 0.0:
        return 0
    avail = np.nonzero(prep.codes == AVAILABLE)[0]
    if avail.size == 0:
        return 0
    k = int(avail.size * frac)
    if k >= avail.size:
        return int(prep.ticks.size)
    return int(avail[k])


def train_trend_network(prep: Prepared, cfg: RunConfig, seed: int,
                        end_index: int | None = None) -> TrendNetwork:
    t = cfg.trend
    fwd = forward_returns(prep, t.horizon_minutes)
    mask = (prep.codes == AVAILABLE) & np.isfinite(fwd)
    if end_index is not None:
        cutoff = max(end_index - t.horizon_minutes, 0)
        mask &= np.arange(prep.ticks.size) < cutoff
    eligible = np.nonzero(mask)[0]
    if eligible.size == 0:
        raise InputError("no eligible ticks to train the trend network")
    rng = np.random.default_rng(derive_seed(seed, "trend-sample"))
    picked = _subsample(eligible, max(1, eligible.size // t.max_samples), t.max_samples,
                        rng)
    idx = {k: v[picked] for k, v in prep.idx.items()}
    X = prep.assembler.trend_inputs(prep.ticks[picked], idx)
    y = np.clip(fwd[picked] / t.target_scale, -1.0, 1.0)
    net = TrendNetwork(learning_rate=t.learning_rate, momentum=t.momentum,
                       epochs=t.epochs, batch_size=t.batch_size,
                       lambda_l2=t.lambda_l2, seed=derive_seed(seed, "trend"))
    net.fit(X, y)
    return net


def trend_scores(prep: Prepared, net: TrendNetwork, chunk: int = 65_536) -> np.ndarray:
    """Score every available tick; NaN elsewhere."""
    scores = np.full(prep.ticks.shape, np.nan)
    avail = np.nonzero(prep.codes == AVAILABLE)[0]
    for start in range(0, avail.size, chunk):
        part = avail[start:start + chunk]
        idx = {k: v[part] for k, v in prep.idx.items()}
        X = prep.assembler.trend_inputs(prep.ticks[part], idx)
        scores[part] = net.predict(X)
    return scores


def regime_codes(scores: np.ndarray, t_bear: float, t_bull: float) -> np.ndarray:
    """0 bearish / 1 neutral / 2 bullish / -1 unavailable. Boundaries are neutral."""
    codes = np.full(scores.shape, -1, dtype=np.int8)
    ok = np.isfinite(scores)
    codes[ok] = 1
    codes[ok & (scores < t_bear)] = 0
    codes[ok & (scores > t_bull)] = 2
    return codes


def _gather_inputs(prep: Prepared, scores: np.ndarray, picked: np.ndarray) -> dict:
    idx = {k: v[picked] for k, v in prep.idx.items()}
    inputs = prep.assembler.batch_inputs(prep.ticks[picked], idx)
    ctx = np.stack([scores[picked], inputs.pop("volatility")], axis=1)
    inputs["ctx"] = ctx
    return inputs


def train_direction_book(prep: Prepared, scores: np.ndarray, labels: np.ndarray,
                         cfg: RunConfig, seed: int, use_attention: bool = True,
                         end_index: int | None = None) -> tuple[RegimeBook, dict]:
    """Regime-specialized ensembles; sparse regimes fall back to the full pool."""
    t = cfg.train
    regimes = regime_codes(scores, cfg.engine.t_bear, cfg.engine.t_bull)
    eligible = (prep.codes == AVAILABLE) & (labels >= 0)
    if end_index is not None:
        cutoff = max(end_index - t.label_horizon, 0)
        eligible &= np.arange(prep.ticks.size) < cutoff
    pool = np.nonzero(eligible)[0]
    if pool.size == 0:
        raise InputError("no eligible training ticks")
    rng = np.random.default_rng(derive_seed(seed, "direction-sample"))
    lists: dict[str, list] = {}
    info: dict[str, dict] = {}
    for code, regime in enumerate(REGIME_NAMES):
        members = np.nonzero(eligible & (regimes == code))[0]
        fallback = members.size < t.min_regime_samples
        source = pool if fallback else members
        picked = _subsample(source, t.sample_stride, t.max_samples, rng)
        inputs = _gather_inputs(prep, scores, picked)
        y = labels[picked]
        models = []
        for i in range(cfg.engine.models_per_regime):
            net = DirectionNetwork(
                preset=cfg.preset, schema=cfg.schema, learning_rate=t.learning_rate,
                momentum=t.momentum, epochs=t.epochs, batch_size=t.batch_size,
                lambda_l2=t.lambda_l2, use_attention=use_attention,
                val_fraction=t.val_fraction,
                seed=derive_seed(seed, f"direction-{regime}-{i}"))
            net.fit(inputs, y)
            models.append(net)
        lists[regime] = models
        info[regime] = {"samples": int(picked.size), "fallback_pool": bool(fallback),
                        "history": [m.history_[-1] for m in models]}
    book = RegimeBook(bearish=lists["bearish"], neutral=lists["neutral"],
                      bullish=lists["bullish"], t_bear=cfg.engine.t_bear,
                      t_bull=cfg.engine.t_bull)
    return book, info


@dataclass
class DecisionSet:
    ticks: np.ndarray
    actions: np.ndarray        # 0 buy / 1 sell / 2 hold / 3 no-action
    tiers: np.ndarray          # 0 large / 1 small / 2 none
    final_confidence: np.ndarray
    consensus: np.ndarray
    regimes: np.ndarray        # -1 unavailable
    reasons: np.ndarray        # int8: 0 ok, 1 insufficient, 2 gap, 3 low confidence
    classes: np.ndarray        # (n, models) int8, -1 where not evaluated
    confs: np.ndarray

    def reason_name(self, i: int) -> str:
        return {0: "", 1: "insufficient_history", 2: "gap",
                3: "low_confidence"}[int(self.reasons[i])]


def predict_decisions(prep: Prepared, book: RegimeBook, scores: np.ndarray,
                      thresholds: ThresholdConfig, chunk: int = 16_384,
                      start: int = 0) -> DecisionSet:
    n = prep.ticks.size
    m = len(book.neutral)
    classes = np.full((n, m), -1, dtype=np.int8)
    confs = np.zeros((n, m))
    regimes = regime_codes(scores, book.t_bear, book.t_bull)
    regimes[prep.codes != AVAILABLE] = -1
    if start > 0:
        regimes[:start] = -1
    for code, regime in enumerate(REGIME_NAMES):
        members = np.nonzero(regimes == code)[0]
        if members.size == 0:
            continue
        for lo in range(0, members.size, chunk):
            part = members[lo:lo + chunk]
            inputs = _gather_inputs(prep, scores, part)
            for j, model in enumerate(book.models(regime)):
                probs = model.batch_probs(inputs)
                classes[part, j] = np.argmax(probs, axis=1)
                confs[part, j] = probs.max(axis=1)

    actions = np.full(n, 3, dtype=np.int8)
    tiers = np.full(n, 2, dtype=np.int8)
    final = np.zeros(n)
    consensus_arr = np.zeros(n)
    reasons = np.zeros(n, dtype=np.int8)
    reasons[prep.codes == INSUFFICIENT] = 1
    reasons[prep.codes == GAP] = 2
    evaluated = np.nonzero(regimes >= 0)[0]
    if evaluated.size:
        a, t, f, c = decisions_vectorized(classes[evaluated], confs[evaluated],
                                          thresholds)
        actions[evaluated] = a
        tiers[evaluated] = t
        final[evaluated] = f
        consensus_arr[evaluated] = c
        low = evaluated[a == 3]
        reasons[low] = 3
    return DecisionSet(ticks=prep.ticks, actions=actions, tiers=tiers,
                       final_confidence=final, consensus=consensus_arr,
                       regimes=regimes, reasons=reasons, classes=classes, confs=confs)


def thresholds_from(cfg: RunConfig) -> ThresholdConfig:
    return ThresholdConfig(threshold_high=cfg.engine.threshold_high,
                           threshold_low=cfg.engine.threshold_low,
                           size_large=cfg.risk.size_large,
                           size_small=cfg.risk.size_small)


def risk_limits_from(cfg: RunConfig) -> RiskLimits:
    return RiskLimits(max_position_fraction=cfg.risk.max_position_fraction,
                      max_drawdown_halt=cfg.risk.max_drawdown_halt,
                      per_trade_stop=cfg.exec.stop,
                      profit_target=cfg.exec.profit_target,
                      size_large=cfg.risk.size_large,
                      size_small=cfg.risk.size_small)


def run_backtest(prep: Prepared, book: RegimeBook, trend_net: TrendNetwork,
                 cfg: RunConfig, seed: int) -> tuple[BacktestReport, DecisionSet, np.ndarray]:
    """Score, decide, and replay the out-of-sample segment of the tick range."""
    start = oos_start_index(prep, cfg)
    scores = trend_scores(prep, trend_net)
    decisions = predict_decisions(prep, book, scores, thresholds_from(cfg),
                                  start=start)
    report = run_decision_ledger(prep, decisions, cfg, seed, start=start)
    return report, decisions, scores


def decision_counters(d: DecisionSet) -> dict:
    return {
        "ticks": int(d.ticks.size),
        "decisions_buy": int((d.actions == 0).sum()),
        "decisions_sell": int((d.actions == 1).sum()),
        "decisions_hold": int((d.actions == 2).sum()),
        "no_action_low_confidence": int((d.reasons == 3).sum()),
        "no_action_gap": int((d.reasons == 2).sum()),
        "no_action_insufficient_history": int((d.reasons == 1).sum()),
        "mean_final_confidence": float(d.final_confidence[d.regimes >= 0].mean())
        if (d.regimes >= 0).any() else 0.0,
    }


def random_actions(prep: Prepared, seed: int, entry_prob: float = 0.05) -> DecisionSet:
    """No-skill baseline: random direction at the strategy's cadence, same exits."""
    n = prep.ticks.size
    rng = np.random.default_rng(derive_seed(seed, "random-baseline"))
    draw = rng.random(n)
    direction = rng.integers(0, 2, size=n).astype(np.int8)
    actions = np.full(n, 3, dtype=np.int8)
    live = (prep.codes == AVAILABLE) & (draw < entry_prob)
    actions[live] = direction[live]
    tiers = np.full(n, 2, dtype=np.int8)
    tiers[live] = 1
    reasons = np.zeros(n, dtype=np.int8)
    reasons[prep.codes == INSUFFICIENT] = 1
    reasons[prep.codes == GAP] = 2
    m = 1
    return DecisionSet(ticks=prep.ticks, actions=actions, tiers=tiers,
                       final_confidence=np.where(live, 1.0, 0.0),
                       consensus=np.where(live, 1.0, 0.0),
                       regimes=np.where(prep.codes == AVAILABLE, 1, -1).astype(np.int8),
                       reasons=reasons, classes=np.full((n, m), -1, dtype=np.int8),
                       confs=np.zeros((n, m)))


def run_decision_ledger(prep: Prepared, decisions: DecisionSet, cfg: RunConfig,
                        seed: int, start: int = 0) -> BacktestReport:
    rows = zip(decisions.ticks[start:].tolist(), prep.prices[start:].tolist(),
               decisions.actions[start:].tolist(), decisions.tiers[start:].tolist())
    report = run_ledger(rows, cfg.exec, risk_limits_from(cfg), seed)
    report.counters.update(decision_counters(decisions))
    report.counters["oos_start_index"] = int(start)
    return report
