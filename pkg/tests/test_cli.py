import hashlib
import json
from pathlib import Path

import pytest

from ticktrader.cli import main

SMALL_KEYS = """
schema.lookback_minute = 60
schema.lookback_hour = 24
schema.lookback_day = 9
schema.sma_fast = 2
schema.sma_slow = 5
schema.trend_ma_windows = 1,3,7
train.epochs = 2
train.split_fraction = 0.5
model.models_per_regime = 2
"""


def synth_dir(tmp_path: Path, days=16, seed=33) -> Path:
    data = tmp_path / "data"
    conf = tmp_path / "synth.conf"
    conf.write_text(f"seed = {seed}\nsynth.days = {days}\nsynth.book_levels = 5\n")
    assert main(["synth", "--config", str(conf), "--out", str(data)]) == 0
    (data / "run.conf").write_text((data / "run.conf").read_text() + SMALL_KEYS)
    return data


def file_digests(path: Path) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(path.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    data = synth_dir(tmp)
    return tmp, data


class TestValidate:
    def test_clean_dataset_exit_zero(self, workspace, capsys):
        _, data = workspace
        assert main(["validate", "--config", str(data / "run.conf")]) == 0
        assert "0 gaps" in capsys.readouterr().out

    def test_deleted_minute_reports_gap_exit_two(self, tmp_path, capsys):
        data = synth_dir(tmp_path)
        bars = (data / "bars.csv").read_text().splitlines()
        removed = bars.pop(5000)
        gap_ts = int(removed.split(",")[0])
        (data / "bars.csv").write_text("\n".join(bars) + "\n")
        assert main(["validate", "--config", str(data / "run.conf")]) == 2
        out = capsys.readouterr().out
        assert f"[{gap_ts}..{gap_ts}]" in out
        assert "1 gaps" in out

    def test_corrupt_row_exit_three(self, tmp_path, capsys):
        data = synth_dir(tmp_path, days=2)
        bars = (data / "bars.csv").read_text().splitlines()
        bars[100] = bars[100].replace(",minute,", ",minute,oops", 1)
        (data / "bars.csv").write_text("\n".join(bars) + "\n")
        assert main(["validate", "--config", str(data / "run.conf")]) == 3
        assert "line 101" in capsys.readouterr().out

    def test_unknown_config_key_exit_three(self, tmp_path):
        conf = tmp_path / "bad.conf"
        conf.write_text("no.such.key = 1\n")
        assert main(["validate", "--config", str(conf)]) == 3


class TestPipelineCommands:
    def test_backtest_without_checkpoints_exit_four(self, workspace, capsys):
        tmp, data = workspace
        out = tmp / "bare"
        assert main(["backtest", "--config", str(data / "run.conf"),
                     "--out", str(out)]) == 4
        assert "train" in capsys.readouterr().out

    def test_train_missing_data_exit_four(self, tmp_path, capsys):
        conf = tmp_path / "nodata.conf"
        conf.write_text("data.bars = missing.csv\n")
        assert main(["train", "--config", str(conf), "--out", str(tmp_path)]) == 4

    def test_full_flow_and_idempotence(self, workspace, capsys):
        tmp, data = workspace
        run = tmp / "run"
        conf = str(data / "run.conf")
        assert main(["train", "--config", conf, "--out", str(run)]) == 0
        ckpts = list((run / "checkpoints").glob("*.ptnn"))
        assert len(ckpts) == 1 + 3 * 2  # trend + 3 regimes x 2 models
        assert main(["backtest", "--config", conf, "--out", str(run)]) == 0
        for name in ("report.json", "trades.csv", "trend.csv", "decisions.jsonl",
                     "train_summary.json"):
            assert (run / name).exists(), name
        report1 = json.loads((run / "report.json").read_text())
        capsys.readouterr()

        # identical seed and config: identical artifacts
        run2 = tmp / "run2"
        assert main(["train", "--config", conf, "--out", str(run2)]) == 0
        assert main(["backtest", "--config", conf, "--out", str(run2)]) == 0
        report2 = json.loads((run2 / "report.json").read_text())
        assert report1 == report2
        capsys.readouterr()

        assert main(["report", "--config", conf, "--out", str(run)]) == 0
        out = capsys.readouterr().out
        pf = report1["metrics"]["profit_factor"]
        if pf is not None:
            assert f"{pf:.4f}" in out
        assert str(report1["metrics"]["trade_count"]) in out

    def test_inputs_never_mutated(self, workspace):
        tmp, data = workspace
        before = file_digests(data)
        main(["latency", "--config", str(data / "run.conf"),
              "--out", str(tmp / "lat")])
        after = file_digests(data)
        assert before == after

    def test_latency_artifacts(self, workspace, capsys):
        tmp, data = workspace
        out = tmp / "lat2"
        assert main(["latency", "--config", str(data / "run.conf"),
                     "--out", str(out)]) == 0
        result = json.loads((out / "latency.json").read_text())
        assert result["predict"]["p99_ms"] < 50.0
        assert "end_to_end" in capsys.readouterr().out

    def test_feature_dump_written(self, workspace):
        tmp, data = workspace
        run = tmp / "run"  # checkpoints exist from the full-flow test
        conf = data / "dump.conf"
        conf.write_text((data / "run.conf").read_text()
                        + "features.dump_limit = 20\n")
        assert main(["backtest", "--config", str(conf), "--out", str(run)]) == 0
        lines = (run / "features.jsonl").read_text().splitlines()
        assert len(lines) == 20
        rec = json.loads(lines[0])
        assert "minute" in rec and "m.ret" in rec["minute"]
        assert len(rec["sentiment"]) == 10

    def test_validate_reports_feed_simulation(self, workspace, capsys):
        tmp, data = workspace
        conf = data / "feed.conf"
        conf.write_text((data / "run.conf").read_text()
                        + "feed.drop_prob = 0.25\nfeed.seed = 9\n")
        assert main(["validate", "--config", str(conf)]) == 0
        out = capsys.readouterr().out
        assert "feed simulation" in out and "dropped" in out

    def test_seed_override_changes_artifacts(self, workspace):
        tmp, data = workspace
        conf = str(data / "run.conf")
        run_a = tmp / "seed_a"
        run_b = tmp / "seed_b"
        assert main(["train", "--config", conf, "--out", str(run_a),
                     "--seed", "77"]) == 0
        assert main(["train", "--config", conf, "--out", str(run_b),
                     "--seed", "78"]) == 0
        a = (run_a / "checkpoints" / "trend.ptnn").read_bytes()
        b = (run_b / "checkpoints" / "trend.ptnn").read_bytes()
        assert a != b
