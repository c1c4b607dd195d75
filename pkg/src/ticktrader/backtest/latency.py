"""Per-stage latency measurement: assembly, prediction, decision, end to end.

Exchange delay is simulated arithmetically from a seeded draw; nothing
sleeps. End-to-end figures are pipeline time plus that draw.
"""

from __future__ import annotations

import time

import numpy as np

from ..config import derive_seed
from ..engine.decision import ThresholdConfig, decide_from_predictions
from ..errors import InputError
from ..features.assemble import FrameAssembler, FrameUnavailable
from ..models.direction import AttentionContext, DirectionNetwork


def _percentiles(samples_ms: list[float]) -> dict:
    arr = np.asarray(samples_ms)
    return {"p50_ms": float(np.percentile(arr, 50)),
            "p99_ms": float(np.percentile(arr, 99)),
            "mean_ms": float(arr.mean()), "samples": int(arr.size)}


def measure_latency(assembler: FrameAssembler, models: list[DirectionNetwork],
                    ticks: np.ndarray, repetitions: int, exchange_delay_ms: float,
                    seed: int, thresholds: ThresholdConfig | None = None) -> dict:
    """Single-tick pipeline timings over `repetitions` passes (post warmup)."""
    thresholds = thresholds or ThresholdConfig()
    usable = [int(t) for t in ticks
              if not isinstance(assembler.frame_at(int(t)), FrameUnavailable)]
    if not usable:
        raise InputError("no available ticks to measure")
    rng = np.random.default_rng(derive_seed(seed, "latency"))
    ctx = AttentionContext(np.zeros(models[0].config_.ctx_width))

    # warmup pass so allocator and caches settle
    frame = assembler.frame_at(usable[0])
    for model in models:
        model.predict_frame(frame, ctx)

    stage = {"assemble": [], "predict": [], "decide": [], "end_to_end": []}
    for i in range(repetitions):
        ts = usable[i % len(usable)]
        t0 = time.perf_counter()
        frame = assembler.frame_at(ts)
        t1 = time.perf_counter()
        preds = [model.predict_frame(frame, ctx) for model in models]
        t2 = time.perf_counter()
        decide_from_predictions(ts, [(p.predicted_class, p.confidence) for p in preds],
                                "neutral", thresholds)
        t3 = time.perf_counter()
        delay = max(0.0, float(rng.normal(exchange_delay_ms, exchange_delay_ms * 0.1)))
        stage["assemble"].append((t1 - t0) * 1e3)
        stage["predict"].append((t2 - t1) * 1e3 / max(len(models), 1))
        stage["decide"].append((t3 - t2) * 1e3)
        stage["end_to_end"].append((t3 - t0) * 1e3 + delay)
    out = {name: _percentiles(samples) for name, samples in stage.items()}
    out["exchange_delay_ms"] = exchange_delay_ms
    return out


def render_latency(result: dict) -> str:
    lines = [f"{'Stage':<12} {'p50 ms':>10} {'p99 ms':>10} {'mean ms':>10}",
             "-" * 44]
    for name in ("assemble", "predict", "decide", "end_to_end"):
        r = result[name]
        lines.append(f"{name:<12} {r['p50_ms']:>10.3f} {r['p99_ms']:>10.3f} "
                     f"{r['mean_ms']:>10.3f}")
    lines.append(f"(simulated exchange delay {result['exchange_delay_ms']:.0f} ms "
                 f"included in end_to_end)")
    return "\n".join(lines)
