"""Regime-gated ensemble decisions: select, vote, agree, gate, size.

Tie policy is "hold" everywhere and regime boundaries fall to neutral;
degraded inputs (missing frames, bad values) become no-action decisions
with a machine-readable reason, never exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..features.assemble import FrameUnavailable
from ..models.direction import HOLD, CLASS_NAMES, DirectionPrediction

REGIMES = ("bearish", "neutral", "bullish")
ACTIONS = CLASS_NAMES + ("no-action",)


@dataclass
class RegimeBook:
    bearish: list
    neutral: list
    bullish: list
    t_bear: float = -1.0 / 3.0
    t_bull: float = 1.0 / 3.0

    def __post_init__(self):
        if not (-1.0 <= self.t_bear < self.t_bull <= 1.0):
            raise InputError("regime thresholds must satisfy -1 <= t_bear < t_bull <= 1")
        for regime in REGIMES:
            if not getattr(self, regime):
                raise InputError(f"regime {regime!r} has no models")

    def models(self, regime: str) -> list:
        return getattr(self, regime)


@dataclass(frozen=True)
class ThresholdConfig:
    threshold_high: float = 0.70
    threshold_low: float = 0.55
    size_large: float = 0.10
    size_small: float = 0.04

    def __post_init__(self):
        if not 0.0 < self.threshold_low < self.threshold_high <= 1.0:
            raise InputError("thresholds must satisfy 0 < low < high <= 1")
        if not 0.0 < self.size_small < self.size_large <= 1.0:
            raise InputError("sizes must satisfy 0 < small < large <= 1")


@dataclass
class EnsembleDecision:
    ts: int
    action: str
    final_confidence: float
    consensus: float
    size_tier: str                    # "large" | "small" | "none"
    regime: str = ""
    predictions: list = field(default_factory=list)  # (class index, confidence)
    reason: str = ""

    def __post_init__(self):
        if (self.size_tier == "none") != (self.action == "no-action"):
            raise InputError("size tier none exactly when action is no-action")
        if not 0.0 <= self.final_confidence <= 1.0:
            raise InputError("final confidence outside [0, 1]")


def select_networks(score, book: RegimeBook) -> tuple[list, str]:
    """Bearish below t_bear, bullish above t_bull, neutral otherwise (boundaries in)."""
    value = float(getattr(score, "value", score))
    if value < book.t_bear:
        regime = "bearish"
    elif value > book.t_bull:
        regime = "bullish"
    else:
        regime = "neutral"
    return book.models(regime), regime


def weighted_vote(predictions: list[int], confidences: list[float]) -> int:
    """Class with the largest confidence mass; any tie falls to hold."""
    if not predictions or len(predictions) != len(confidences):
        raise InputError("predictions and confidences must be non-empty, equal length")
    if any(c < 0.0 or c > 1.0 for c in confidences):
        raise InputError("confidences must lie in [0, 1]")
    totals = np.zeros(3)
    for cls, conf in zip(predictions, confidences):
        totals[cls] += conf
    best = float(totals.max())
    winners = np.nonzero(totals == best)[0]
    return int(winners[0]) if winners.size == 1 else HOLD


def consensus(predictions: list[int]) -> float:
    """Fraction agreeing with the modal class (modal ties: lowest class index)."""
    if not predictions:
        raise InputError("consensus of empty prediction list")
    counts = np.bincount(np.asarray(predictions, dtype=np.int64), minlength=3)
    modal = int(np.argmax(counts))  # lowest index on ties
    return counts[modal] / len(predictions)


def combine_scores(confidences: list[float], consensus_score: float) -> float:
    """Mean individual certainty scaled by agreement; poor consensus suppresses."""
    if len(confidences) == 0:
        raise InputError("combine_scores with no confidences")
    if not 0.0 <= consensus_score <= 1.0:
        raise InputError("consensus outside [0, 1]")
    return float(np.mean(confidences)) * consensus_score


def decide_from_predictions(ts: int, preds: list[tuple[int, float]], regime: str,
                            thresholds: ThresholdConfig) -> EnsembleDecision:
    """Combiner shared by live decide() and the batched backtest path."""
    classes = [p[0] for p in preds]
    confs = [p[1] for p in preds]
    ensemble_class = weighted_vote(classes, confs)
    consensus_score = consensus(classes)
    final_confidence = combine_scores(confs, consensus_score)
    if final_confidence > thresholds.threshold_high:
        tier = "large"
    elif final_confidence > thresholds.threshold_low:
        tier = "small"
    else:
        return EnsembleDecision(ts=ts, action="no-action",
                                final_confidence=final_confidence,
                                consensus=consensus_score, size_tier="none",
                                regime=regime, predictions=preds,
                                reason="low_confidence")
    return EnsembleDecision(ts=ts, action=CLASS_NAMES[ensemble_class],
                            final_confidence=final_confidence,
                            consensus=consensus_score, size_tier=tier, regime=regime,
                            predictions=preds)


def _no_action(ts: int, regime: str, reason: str) -> EnsembleDecision:
    return EnsembleDecision(ts=ts, action="no-action", final_confidence=0.0,
                            consensus=0.0, size_tier="none", regime=regime,
                            reason=reason)


def decide(frame, ctx, score, book: RegimeBook,
           thresholds: ThresholdConfig) -> EnsembleDecision:
    """Full inference step for one tick. Never raises: degraded states in, no-action out."""
    ts = int(getattr(frame, "ts", 0))
    if isinstance(frame, FrameUnavailable):
        return _no_action(ts, "", frame.reason)
    try:
        models, regime = select_networks(score, book)
    except InputError:
        return _no_action(ts, "", "invalid_book")
    preds: list[tuple[int, float]] = []
    try:
        for model in models:
            p: DirectionPrediction = model.predict_frame(frame, ctx)
            preds.append((p.predicted_class, p.confidence))
        return decide_from_predictions(ts, preds, regime, thresholds)
    except Exception:
        return _no_action(ts, regime, "invalid_input")


def decisions_vectorized(classes: np.ndarray, confs: np.ndarray,
                         thresholds: ThresholdConfig):
    """Batched combiner over (n, models) class/confidence arrays.

    Returns (actions, tiers, final_confidence, consensus) where actions use
    0 buy / 1 sell / 2 hold / 3 no-action and tiers 0 large / 1 small / 2 none.
    Must agree with decide_from_predictions row by row.
    """
    n, m = classes.shape
    sums = np.stack([np.where(classes == k, confs, 0.0).sum(axis=1)
                     for k in range(3)], axis=1)
    best = sums.max(axis=1, keepdims=True)
    tie = (sums == best).sum(axis=1) > 1
    vote = np.argmax(sums, axis=1)
    vote[tie] = HOLD
    counts = np.stack([(classes == k).sum(axis=1) for k in range(3)], axis=1)
    consensus_arr = counts[np.arange(n), np.argmax(counts, axis=1)] / m
    final = confs.mean(axis=1) * consensus_arr
    tiers = np.full(n, 2, dtype=np.int8)
    tiers[final > thresholds.threshold_low] = 1
    tiers[final > thresholds.threshold_high] = 0
    actions = vote.astype(np.int8)
    actions[tiers == 2] = 3
    return actions, tiers, final, consensus_arr


def decision_record(decision: EnsembleDecision) -> dict:
    """JSON-ready record for decisions.jsonl."""
    return {
        "ts": decision.ts,
        "regime": decision.regime,
        "models": [{"class": CLASS_NAMES[c], "confidence": conf}
                   for c, conf in decision.predictions],
        "consensus": decision.consensus,
        "final_confidence": decision.final_confidence,
        "action": decision.action,
        "size_tier": decision.size_tier,
        "reason": decision.reason,
    }
