import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ticktrader.data import (Bar, MarketContext, NormalizationSpec, OnChainMetrics,
                             OrderbookSnapshot, SentimentPoint, detect_gaps,
                             denormalize, load_arrays, load_series, normalize,
                             write_series)
from ticktrader.data.gaps import gap_covered_count
from ticktrader.errors import DataError, InputError, ParseError

MIN = 60_000


def make_bars(n, start=0, price=100.0):
    return [Bar(start + i * MIN, "minute", price, price, price, price, 1.0)
            for i in range(n)]


class TestTypes:
    def test_bar_invariants(self):
        Bar(0, "minute", 10, 12, 9, 11, 5.0).validate()
        with pytest.raises(DataError):
            Bar(0, "minute", 10, 9, 9, 11, 5.0).validate()  # high < open
        with pytest.raises(DataError):
            Bar(0, "minute", 10, 12, 9, 11, -1.0).validate()
        with pytest.raises(DataError):
            Bar(30_000, "minute", 10, 12, 9, 11, 1.0).validate()  # misaligned

    def test_orderbook_invariants(self):
        snap = OrderbookSnapshot(0, bids=((100.0, 5.0), (99.5, 2.0)),
                                 asks=((100.5, 3.0), (101.0, 1.0)))
        snap.validate()
        with pytest.raises(DataError):
            OrderbookSnapshot(0, bids=((101.0, 5.0),), asks=((100.5, 3.0),)).validate()
        with pytest.raises(DataError):
            OrderbookSnapshot(0, bids=((100.0, 0.0),), asks=((100.5, 3.0),)).validate()
        with pytest.raises(DataError):  # bids must be descending
            OrderbookSnapshot(0, bids=((99.0, 1.0), (100.0, 1.0)),
                              asks=((100.5, 3.0),)).validate()

    def test_context_bounds(self):
        MarketContext(0, 4500.0, 0.55).validate()
        with pytest.raises(DataError):
            MarketContext(0, 4500.0, 1.2).validate()
        with pytest.raises(DataError):
            MarketContext(0, -1.0, 0.5).validate()

    def test_onchain_nonnegative(self):
        OnChainMetrics(0, 10, 100.0).validate()
        with pytest.raises(DataError):
            OnChainMetrics(0, -1, 100.0).validate()


class TestLoaders:
    def test_empty_file_empty_series(self, tmp_path):
        p = tmp_path / "bars.csv"
        p.write_text("ts,timeframe,open,high,low,close,volume\n")
        assert load_series(p, "bars") == []
        p2 = tmp_path / "zero.csv"
        p2.write_text("")
        assert load_series(p2, "bars") == []

    def test_bad_bar_names_row(self, tmp_path):
        p = tmp_path / "bars.csv"
        p.write_text("ts,timeframe,open,high,low,close,volume\n"
                     "0,minute,10,12,9,11,1\n"
                     "60000,minute,10,8,9,11,1\n")  # high < low
        with pytest.raises(DataError, match="row 3"):
            load_series(p, "bars")

    def test_corrupt_value_names_line(self, tmp_path):
        p = tmp_path / "bars.csv"
        p.write_text("ts,timeframe,open,high,low,close,volume\n"
                     "0,minute,10,12,9,eleven,1\n")
        with pytest.raises(ParseError, match="line 2"):
            load_series(p, "bars")

    def test_non_monotone_rejected(self, tmp_path):
        p = tmp_path / "sentiment.csv"
        p.write_text("ts,score\n900000,0.1\n0,0.2\n")
        with pytest.raises(DataError, match="non-monotone"):
            load_series(p, "sentiment")

    def test_round_trip_1440_bars(self, tmp_path):
        bars = make_bars(1440)
        p = tmp_path / "bars.csv"
        assert write_series(p, "bars", bars) == 1440
        loaded = load_series(p, "bars")
        assert len(loaded) == 1440
        assert loaded[0].ts == 0 and loaded[-1].ts == 1439 * MIN
        assert loaded == bars

    def test_book_round_trip(self, tmp_path):
        snaps = [OrderbookSnapshot(i * MIN, bids=((100.0 - i, 5.0),),
                                   asks=((100.5 + i, 3.0),)) for i in range(10)]
        p = tmp_path / "book.jsonl"
        write_series(p, "book", snaps)
        loaded = load_series(p, "book")
        assert loaded == snaps

    def test_book_bad_line_number(self, tmp_path):
        p = tmp_path / "book.jsonl"
        p.write_text('{"ts": 0, "bids": [[100, 1]], "asks": [[101, 1]]}\n'
                     'not json\n')
        with pytest.raises(ParseError, match="line 2"):
            load_series(p, "book")

    def test_wrong_header_rejected(self, tmp_path):
        p = tmp_path / "onchain.csv"
        p.write_text("ts,count,volume\n0,1,2\n")
        with pytest.raises(ParseError, match="header"):
            load_series(p, "onchain")

    def test_missing_file_is_parse_error(self, tmp_path):
        with pytest.raises(ParseError):
            load_series(tmp_path / "nope.csv", "bars")


class TestNormalization:
    def test_basic_values(self):
        spec = NormalizationSpec({"x": (100.0, 20.0)})
        assert normalize("x", 100.0, spec) == 0.0
        assert normalize("x", 120.0, spec) == 1.0
        assert normalize("x", 150.0, spec) == 2.5

    def test_unknown_feature_never_passes_through(self):
        spec = NormalizationSpec({"x": (0.0, 1.0)})
        with pytest.raises(InputError):
            normalize("y", 1.0, spec)

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(InputError):
            NormalizationSpec({"x": (0.0, 0.0)})

    @settings(max_examples=300, deadline=None, derandomize=True)
    @given(center=st.floats(-1e6, 1e6), scale=st.floats(1e-6, 1e6),
           value=st.floats(-1e6, 1e6))
    def test_round_trip(self, center, scale, value):
        spec = NormalizationSpec({"f": (center, scale)})
        back = denormalize("f", normalize("f", value, spec), spec)
        assert back == pytest.approx(value, abs=1e-12 * max(1.0, abs(value), scale, abs(center)))

    def test_round_trip_bulk_random(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            center = rng.uniform(-1e4, 1e4)
            scale = rng.uniform(1e-3, 1e4)
            value = rng.uniform(-1e4, 1e4)
            spec = NormalizationSpec({"f": (center, scale)})
            assert abs(denormalize("f", normalize("f", value, spec), spec) - value) < 1e-8


class TestGaps:
    def test_contiguous_no_gaps(self):
        assert detect_gaps(make_bars(100), MIN) == []

    def test_single_missing_minute(self):
        bars = [b for b in make_bars(10) if b.ts != 5 * MIN]
        assert detect_gaps(bars, MIN) == [(5 * MIN, 5 * MIN)]

    def test_two_gaps(self):
        drop = {5 * MIN, 6 * MIN, 7 * MIN, 60 * MIN}
        bars = [b for b in make_bars(120) if b.ts not in drop]
        assert detect_gaps(bars, MIN) == [(5 * MIN, 7 * MIN), (60 * MIN, 60 * MIN)]

    def test_empty_series(self):
        assert detect_gaps([], MIN) == []

    def test_random_deletions_covered_count(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(10, 400))
            k = int(rng.integers(0, n - 2))
            # never delete the endpoints: gaps are interior by definition
            interior = rng.choice(np.arange(1, n - 1), size=k, replace=False) if k else []
            drop = {int(i) * MIN for i in interior}
            ts = [i * MIN for i in range(n) if i * MIN not in drop]
            gaps = detect_gaps(ts, MIN)
            assert gap_covered_count(gaps, MIN) == len(drop)
