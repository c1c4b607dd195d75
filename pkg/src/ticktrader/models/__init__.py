from .trend import TrendInputs, TrendScore, TrendNetwork, evaluate_trend
from .direction import (AttentionContext, AttentionResult, DirectionModelConfig,
                        DirectionNetwork, DirectionPrediction, HeadOutput, attention,
                        param_count, predict_no_attention, CLASS_NAMES)

__all__ = [
    "TrendInputs", "TrendScore", "TrendNetwork", "evaluate_trend",
    "AttentionContext", "AttentionResult", "DirectionModelConfig",
    "DirectionNetwork", "DirectionPrediction", "HeadOutput", "attention",
    "param_count", "predict_no_attention", "CLASS_NAMES",
]
