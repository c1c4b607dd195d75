"""Frame feeds: historical replay and simulated-live with fault injection.

A feed is a single-consumer sequential source. Replay delivers every frame
in timestamp order. Simulated-live draws per-frame drops and delivery lag
from a seeded generator: dropped frames are real absences the consumer has
to detect, lagged frames are re-ordered by delivery time.
"""

from __future__ import annotations

import hashlib
from dataclasses import replace

import numpy as np

from ..errors import FeedError
from .types import FeedFrame

_KIND_ORDER = {"bar": 0, "book": 1, "sentiment": 2, "onchain": 3, "context": 4}


def build_frames(bars=None, books=None, sentiments=None, onchains=None,
                 contexts=None) -> list[FeedFrame]:
    """Merge typed series into one frame stream, ordered by (ts, kind)."""
    frames: list[FeedFrame] = []
    for b in bars or []:
        frames.append(FeedFrame(ts=b.ts, bar=b))
    for s in books or []:
        frames.append(FeedFrame(ts=s.ts, book=s))
    for p in sentiments or []:
        frames.append(FeedFrame(ts=p.ts, sentiment=p))
    for m in onchains or []:
        frames.append(FeedFrame(ts=m.ts, onchain=m))
    for c in contexts or []:
        frames.append(FeedFrame(ts=c.ts, context=c))
    frames.sort(key=lambda f: (f.ts, _KIND_ORDER[f.kind()]))
    return frames


class ReplayFeed:
    """Deterministic in-order replay of a frame list."""

    def __init__(self, frames: list[FeedFrame]):
        self._frames = frames
        self._pos = 0

    def __iter__(self):
        return self

    def __next__(self) -> FeedFrame:
        if self._pos >= len(self._frames):
            raise StopIteration
        frame = self._frames[self._pos]
        self._pos += 1
        return frame

    def __len__(self) -> int:
        return len(self._frames)


class SimulatedLiveFeed:
    """Replay with seeded fault injection.

    drop_prob omits frames entirely; lag shifts delivery time by
    max(0, N(lag_ms_mean, lag_ms_std)) and frames are consumed in delivery
    order. `drop_kinds` restricts dropping to specific payload kinds.
    """

    def __init__(self, frames: list[FeedFrame], drop_prob: float = 0.0,
                 lag_ms_mean: float = 0.0, lag_ms_std: float = 0.0,
                 seed: int = 0, drop_kinds: tuple[str, ...] | None = None):
        if not 0.0 <= drop_prob <= 1.0:
            raise FeedError(f"drop_prob {drop_prob} outside [0, 1]")
        rng = np.random.default_rng(seed)
        delivered: list[FeedFrame] = []
        for idx, frame in enumerate(frames):
            droppable = drop_kinds is None or frame.kind() in drop_kinds
            if droppable and rng.random() < drop_prob:
                continue
            lag = 0.0
            if lag_ms_std > 0 or lag_ms_mean > 0:
                lag = max(0.0, rng.normal(lag_ms_mean, lag_ms_std))
            delivered.append(replace(frame, delivery_ts=frame.ts + int(round(lag))))
        delivered.sort(key=lambda f: (f.delivery_ts, f.ts, _KIND_ORDER[f.kind()]))
        self._feed = ReplayFeed(delivered)

    def __iter__(self):
        return self

    def __next__(self) -> FeedFrame:
        return next(self._feed)

    def __len__(self) -> int:
        return len(self._feed)


def next_frame(feed) -> FeedFrame | None:
    """Pull one frame; None signals a clean end of feed."""
    try:
        return next(feed)
    except StopIteration:
        return None


def frame_sequence_hash(feed) -> str:
    """Order-sensitive digest of a feed's delivery sequence, for determinism checks."""
    h = hashlib.sha256()
    for frame in feed:
        h.update(f"{frame.delivery_ts}:{frame.ts}:{frame.kind()}".encode())
    return h.hexdigest()
