from .decision import (EnsembleDecision, RegimeBook, ThresholdConfig, combine_scores,
                       consensus, decide, decide_from_predictions, select_networks,
                       weighted_vote)
from .oracle import decide_bruteforce

__all__ = [
    "EnsembleDecision", "RegimeBook", "ThresholdConfig", "combine_scores",
    "consensus", "decide", "decide_from_predictions", "select_networks",
    "weighted_vote", "decide_bruteforce",
]
