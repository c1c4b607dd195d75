import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from ticktrader.config import SynthConfig, parse_config
from ticktrader.data.io import load_arrays, load_series
from ticktrader.synth import generate


def dir_digest(path: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(path.iterdir()):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


class TestGenerator:
    def test_same_seed_identical_files(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        cfg = SynthConfig(days=3, book_levels=5)
        generate(cfg, seed=11, out_dir=a)
        generate(cfg, seed=11, out_dir=b)
        assert dir_digest(a) == dir_digest(b)

    def test_different_seed_differs(self, tmp_path):
        cfg = SynthConfig(days=2, book_levels=5)
        generate(cfg, seed=1, out_dir=tmp_path / "a")
        generate(cfg, seed=2, out_dir=tmp_path / "b")
        assert dir_digest(tmp_path / "a") != dir_digest(tmp_path / "b")

    def test_outputs_pass_validation(self, tmp_path):
        generate(SynthConfig(days=2, book_levels=8), seed=3, out_dir=tmp_path)
        for kind, name in (("bars", "bars.csv"), ("book", "book.jsonl"),
                           ("sentiment", "sentiment.csv"),
                           ("onchain", "onchain.csv"), ("context", "context.csv")):
            series = load_series(tmp_path / name, kind)
            assert len(series) > 0

    def test_generated_config_parses(self, tmp_path):
        generate(SynthConfig(days=2), seed=4, out_dir=tmp_path)
        cfg = parse_config(tmp_path / "run.conf")
        assert cfg.seed == 4
        assert Path(cfg.paths["bars"]).exists()

    def test_zero_signal_no_correlation(self, tmp_path):
        # 50k ticks, strength 0: |corr| within sampling noise of zero
        stats = generate(SynthConfig(days=35, signal_strength=0.0, book_levels=5),
                         seed=5, out_dir=tmp_path)
        assert abs(stats["imbalance_return_correlation"]) <= 0.03

    def test_full_signal_strong_correlation(self, tmp_path):
        stats = generate(SynthConfig(days=35, signal_strength=1.0, book_levels=5),
                         seed=6, out_dir=tmp_path)
        assert stats["imbalance_return_correlation"] > 0.5

    def test_book_imbalance_matches_plant(self, tmp_path):
        # measured from the written book itself: same sign structure
        generate(SynthConfig(days=2, signal_strength=1.0, book_levels=5), seed=7,
                 out_dir=tmp_path)
        snaps = load_arrays(tmp_path / "book.jsonl", "book")
        bars = load_arrays(tmp_path / "bars.csv", "bars")
        imb = []
        for s in snaps:
            bid = sum(q for _, q in s.bids)
            ask = sum(q for _, q in s.asks)
            imb.append((bid - ask) / (bid + ask))
        closes = bars["close"]
        rets = closes[1:] / closes[:-1] - 1.0  # rets[i] is the return of bar i+1
        # the snapshot after bar i closes predicts the return of bar i+1
        corr = np.corrcoef(np.array(imb[:-1]), rets)[0, 1]
        assert corr > 0.4

    def test_stats_file_written(self, tmp_path):
        generate(SynthConfig(days=2), seed=8, out_dir=tmp_path)
        stats = json.loads((tmp_path / "synth_stats.json").read_text())
        assert stats["rows"] == 2 * 1440
