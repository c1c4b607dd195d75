"""Brute-force re-implementation of the decision step, for oracle equivalence.

Deliberately shares no logic with decision.py: naive loops, explicit
comparisons. Keep it dumb; its value is independence.
"""

from __future__ import annotations

from ..features.assemble import FrameUnavailable
from .decision import EnsembleDecision, RegimeBook, ThresholdConfig

_CLASSES = ("buy", "sell", "hold")


def decide_bruteforce(frame, ctx, score, book: RegimeBook,
                      thresholds: ThresholdConfig) -> EnsembleDecision:
    ts = int(getattr(frame, "ts", 0))
    if isinstance(frame, FrameUnavailable):
        return EnsembleDecision(ts=ts, action="no-action", final_confidence=0.0,
                                consensus=0.0, size_tier="none", regime="",
                                reason=frame.reason)

    value = score.value if hasattr(score, "value") else float(score)
    if value < book.t_bear:
        regime = "bearish"
        models = book.bearish
    else:
        if value > book.t_bull:
            regime = "bullish"
            models = book.bullish
        else:
            regime = "neutral"
            models = book.neutral

    preds = []
    for model in models:
        p = model.predict_frame(frame, ctx)
        preds.append((p.predicted_class, p.confidence))

    # weighted vote by exhaustive class scan
    sums = [0.0, 0.0, 0.0]
    for cls, conf in preds:
        sums[cls] = sums[cls] + conf
    best_class = None
    tied = False
    best_sum = -1.0
    for cls in (0, 1, 2):
        if sums[cls] > best_sum:
            best_sum = sums[cls]
            best_class = cls
            tied = False
        elif sums[cls] == best_sum:
            tied = True
    if tied:
        best_class = 2  # hold

    # consensus: count each class, first-most-common wins
    counts = [0, 0, 0]
    for cls, _ in preds:
        counts[cls] = counts[cls] + 1
    modal = 0
    for cls in (1, 2):
        if counts[cls] > counts[modal]:
            modal = cls
    consensus_score = counts[modal] / len(preds)

    total = 0.0
    for _, conf in preds:
        total = total + conf
    final_confidence = (total / len(preds)) * consensus_score

    if final_confidence > thresholds.threshold_high:
        action = _CLASSES[best_class]
        tier = "large"
    elif final_confidence > thresholds.threshold_low:
        action = _CLASSES[best_class]
        tier = "small"
    else:
        action = "no-action"
        tier = "none"
    return EnsembleDecision(ts=ts, action=action, final_confidence=final_confidence,
                            consensus=consensus_score, size_tier=tier, regime=regime,
                            predictions=preds,
                            reason="low_confidence" if action == "no-action" else "")
