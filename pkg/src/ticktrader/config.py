"""Run configuration: flat key=value files, typed sections, seed fan-out.

One top-level seed drives every stage; per-stage generators are derived by
hashing the stage name so adding a stage never perturbs the others.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data.normalize import NormalizationSpec
from .errors import ConfigError
from .features.assemble import FeatureSchema

DEFAULT_NORMALIZATION: dict[str, tuple[float, float]] = {
    "m.ret": (0.0, 0.003), "h.ret": (0.0, 0.02), "d.ret": (0.0, 0.08),
    "m.volume": (50.0, 25.0), "h.volume": (3000.0, 1500.0), "d.volume": (72000.0, 36000.0),
    "m.sma_fast": (0.0, 0.004), "h.sma_fast": (0.0, 0.02), "d.sma_fast": (0.0, 0.08),
    "m.sma_slow": (0.0, 0.008), "h.sma_slow": (0.0, 0.04), "d.sma_slow": (0.0, 0.15),
    "m.hl_range": (0.004, 0.004), "h.hl_range": (0.02, 0.02), "d.hl_range": (0.08, 0.08),
    "onchain.tx_count": (3000.0, 1500.0), "onchain.tx_volume": (15000.0, 7500.0),
    "ctx.sp500": (4500.0, 500.0), "ctx.btc_dominance": (0.5, 0.15),
    "sentiment.score": (0.0, 1.0),
    "ob.biggest": (8.0, 6.0), "ob.max_gap": (3.0, 3.0), "ob.imbalance": (0.0, 0.5),
    "volatility.realized": (0.003, 0.002),
    "trend.ma_daily": (0.0, 0.05), "trend.ma_weekly": (0.0, 0.10),
    "trend.ma_monthly": (0.0, 0.20), "trend.tx_volume": (15000.0, 7500.0),
}


@dataclass
class EngineConfig:
    threshold_high: float = 0.70
    threshold_low: float = 0.55
    t_bear: float = -1.0 / 3.0
    t_bull: float = 1.0 / 3.0
    models_per_regime: int = 3
    log_decisions: bool = True


@dataclass
class ExecConfig:
    fee_rate: float = 0.0005
    slippage_bps_mean: float = 2.0
    profit_target: float = 0.004
    stop: float = 0.003
    signal_exit_min_hold: int = 0          # minutes before opposing-signal exits act
    intervals_per_year: float = 525_600.0  # minute ticks, 24/7 market


@dataclass
class RiskConfig:
    max_position_fraction: float = 0.10
    max_drawdown_halt: float = 0.25
    size_large: float = 0.10
    size_small: float = 0.04


@dataclass
class FeedConfig:
    drop_prob: float = 0.0
    lag_ms_mean: float = 0.0
    lag_ms_std: float = 0.0
    seed: int = 0


@dataclass
class SynthConfig:
    days: int = 30
    signal_strength: float = 0.8
    price0: float = 30_000.0
    minute_vol: float = 0.003
    signal_vol_ratio: float = 1.8     # signal component scale, in units of minute_vol
    imbalance_phi: float = 0.98
    imbalance_std: float = 0.45
    book_levels: int = 20
    regime_switch_days: float = 5.0
    regime_drift: float = 0.00003     # per-minute drift magnitude per regime unit
    mean_reversion: float = 0.0002    # log-price pull per minute; keeps the level
                                      # bounded while leaving short-horizon
                                      # predictability intact


@dataclass
class TrainConfig:
    epochs: int = 3
    batch_size: int = 128
    learning_rate: float = 0.05
    momentum: float = 0.9
    lambda_l2: float = 1e-5
    max_samples: int = 20_000
    val_fraction: float = 0.2
    sample_stride: int = 2
    label_horizon: int = 30           # minutes
    label_threshold_sigmas: float = 0.43
    min_regime_samples: int = 500
    split_fraction: float = 0.7       # share of usable ticks for training; the
                                      # ledger replays only the out-of-sample tail


@dataclass
class TrendTrainConfig:
    epochs: int = 60
    batch_size: int = 256
    learning_rate: float = 0.02
    momentum: float = 0.9
    lambda_l2: float = 1e-4
    horizon_minutes: int = 1440
    target_scale: float = 0.03        # forward return mapped to [-1, 1] at this scale
    max_samples: int = 20_000


@dataclass
class LatencyConfig:
    repetitions: int = 300
    exchange_delay_ms: float = 100.0


@dataclass
class RunConfig:
    seed: int = 42
    out_dir: str = "out"
    paths: dict = field(default_factory=dict)
    schema: FeatureSchema = field(default_factory=FeatureSchema)
    norm_entries: dict = field(default_factory=lambda: dict(DEFAULT_NORMALIZATION))
    preset: str = "desk"
    engine: EngineConfig = field(default_factory=EngineConfig)
    exec: ExecConfig = field(default_factory=ExecConfig)
    risk: RiskConfig = field(default_factory=RiskConfig)
    feed: FeedConfig = field(default_factory=FeedConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    trend: TrendTrainConfig = field(default_factory=TrendTrainConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    features_dump_limit: int = 0

    def norm_spec(self) -> NormalizationSpec:
        return NormalizationSpec(self.norm_entries)

    def validate(self, require_files: bool = False) -> None:
        e = self.engine
        if not (0.0 < e.threshold_low < e.threshold_high <= 1.0):
            raise ConfigError("engine thresholds must satisfy 0 < low < high <= 1")
        if not (-1.0 <= e.t_bear < e.t_bull <= 1.0):
            raise ConfigError("regime thresholds must satisfy -1 <= t_bear < t_bull <= 1")
        if e.models_per_regime < 1:
            raise ConfigError("models_per_regime must be >= 1")
        r = self.risk
        if not (0.0 < r.size_small < r.size_large <= r.max_position_fraction):
            raise ConfigError("sizes must satisfy 0 < small < large <= max position fraction")
        for name in ("max_position_fraction", "max_drawdown_halt"):
            v = getattr(r, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"risk.{name} must be in (0, 1]")
        x = self.exec
        if x.fee_rate < 0 or x.slippage_bps_mean < 0:
            raise ConfigError("fees and slippage must be nonnegative")
        if x.profit_target <= 0 or x.stop <= 0:
            raise ConfigError("profit target and stop must be positive")
        for name, (center, scale) in self.norm_entries.items():
            if scale <= 0:
                raise ConfigError(f"norm.{name}.scale must be > 0")
        if require_files:
            for kind, p in self.paths.items():
                if not Path(p).exists():
                    raise ConfigError(f"data.{kind}: file not found: {p}")


_SECTIONS = {
    "engine": EngineConfig, "exec": ExecConfig, "risk": RiskConfig,
    "feed": FeedConfig, "synth": SynthConfig, "train": TrainConfig,
    "trend": TrendTrainConfig, "latency": LatencyConfig,
}

_DATA_KINDS = ("bars", "book", "sentiment", "onchain", "context")


def _convert(raw: str, like) -> object:
    if isinstance(like, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def parse_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse `key = value` lines; later keys win. Unknown keys are errors."""
    path = Path(path)
    cfg = RunConfig()
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc})") from exc
    base = path.parent
    pairs: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        pairs.append((key, raw))
    for key, raw in pairs + list((overrides or {}).items()):
        _apply(cfg, key, str(raw), base)
    cfg.validate()
    return cfg


def _apply(cfg: RunConfig, key: str, raw: str, base: Path) -> None:
    if key == "seed":
        cfg.seed = int(raw)
        return
    if key == "out":
        cfg.out_dir = raw
        return
    if key == "model.preset":
        cfg.preset = raw
        return
    if key == "model.models_per_regime":
        cfg.engine.models_per_regime = int(raw)
        return
    if key == "features.dump_limit":
        cfg.features_dump_limit = int(raw)
        return
    parts = key.split(".")
    if parts[0] == "data" and len(parts) == 2 and parts[1] in _DATA_KINDS:
        p = Path(raw)
        cfg.paths[parts[1]] = str(p if p.is_absolute() else base / p)
        return
    if parts[0] == "schema" and len(parts) == 2:
        if parts[1] not in {f.name for f in fields(FeatureSchema)}:
            raise ConfigError(f"unknown schema field {parts[1]!r}")
        if parts[1] == "trend_ma_windows":
            value: object = tuple(int(v) for v in raw.split(","))
        else:
            value = int(raw)
        cfg.schema = replace(cfg.schema, **{parts[1]: value})
        return
    if parts[0] == "norm" and len(parts) >= 3 and parts[-1] in ("center", "scale"):
        name = ".".join(parts[1:-1])
        center, scale = cfg.norm_entries.get(name, (0.0, 1.0))
        if parts[-1] == "center":
            cfg.norm_entries[name] = (float(raw), scale)
        else:
            cfg.norm_entries[name] = (center, float(raw))
        return
    if parts[0] in _SECTIONS and len(parts) == 2:
        section = getattr(cfg, "exec" if parts[0] == "exec" else parts[0])
        names = {f.name for f in fields(section)}
        if parts[1] not in names:
            raise ConfigError(f"unknown key {key!r}")
        current = getattr(section, parts[1])
        value = _convert(raw, current)
        if parts[1] == "split_fraction" and not 0.0 <= float(raw) < 1.0:
            raise ConfigError("train.split_fraction must be in [0, 1)")
        setattr(section, parts[1], value)
        return
    raise ConfigError(f"unknown key {key!r}")


def derive_seed(seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2 ** 63)


def write_config(path: str | Path, entries: list[tuple[str, object]]) -> None:
    lines = [f"{key} = {value}" for key, value in entries]
    Path(path).write_text("\n".join(lines) + "\n")
