import pytest

from ticktrader.data import (Bar, OrderbookSnapshot, ReplayFeed, SimulatedLiveFeed,
                             build_frames, next_frame)
from ticktrader.data.feed import frame_sequence_hash
from ticktrader.errors import DataError, FeedError

MIN = 60_000


def make_frames(n=50):
    bars = [Bar(i * MIN, "minute", 10, 10, 10, 10, 1.0) for i in range(n)]
    books = [OrderbookSnapshot(i * MIN, bids=((9.9, 1.0),), asks=((10.1, 1.0),))
             for i in range(n)]
    return build_frames(bars=bars, books=books)


def test_replay_delivers_all_in_order():
    frames = make_frames(50)
    feed = ReplayFeed(frames)
    out = list(feed)
    assert len(out) == 100
    assert all(out[i].ts <= out[i + 1].ts for i in range(len(out) - 1))
    assert next_frame(feed) is None


def test_zero_fault_equals_replay():
    frames = make_frames(40)
    live = SimulatedLiveFeed(frames, drop_prob=0.0, seed=1)
    assert frame_sequence_hash(live) == frame_sequence_hash(ReplayFeed(frames))


def test_drop_all_orderbook_payloads():
    frames = make_frames(30)
    live = SimulatedLiveFeed(frames, drop_prob=1.0, drop_kinds=("book",), seed=2)
    kinds = [f.kind() for f in live]
    assert "book" not in kinds
    assert kinds.count("bar") == 30


def test_fixed_seed_identical_omission_pattern():
    frames = make_frames(200)
    h1 = frame_sequence_hash(SimulatedLiveFeed(frames, drop_prob=0.1, seed=7))
    h2 = frame_sequence_hash(SimulatedLiveFeed(frames, drop_prob=0.1, seed=7))
    h3 = frame_sequence_hash(SimulatedLiveFeed(frames, drop_prob=0.1, seed=8))
    assert h1 == h2
    assert h1 != h3


def test_lag_reorders_by_delivery_time():
    frames = make_frames(100)
    live = SimulatedLiveFeed(frames, lag_ms_mean=500.0, lag_ms_std=2000.0, seed=3)
    out = list(live)
    assert len(out) == 200
    assert all(out[i].delivery_ts <= out[i + 1].delivery_ts for i in range(len(out) - 1))
    assert any(f.delivery_ts > f.ts for f in out)


def test_bad_drop_prob_rejected():
    with pytest.raises(FeedError):
        SimulatedLiveFeed([], drop_prob=1.5)


def test_frame_requires_payload():
    from ticktrader.data.types import FeedFrame
    with pytest.raises(DataError):
        FeedFrame(ts=0)
