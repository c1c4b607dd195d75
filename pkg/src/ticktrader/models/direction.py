"""Direction networks: three timeframe CNN heads plus an orderbook linear head,
soft attention over head outputs, and a dense classifier over the mixed vector.

Head outputs share one width so attention can mix them; the scorer network is
shared across heads and sees (head output, market context). The no-attention
variant mean-pools head outputs through the same classifier, which keeps the
ablation comparison clean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .. import nn
from ..config import derive_seed
from ..errors import InputError, ShapeError
from ..features.assemble import FeatureFrame, FeatureSchema
from ..nn.functional import LOG_CLAMP_EPS
from .base import check_labels

CLASS_NAMES = ("buy", "sell", "hold")
BUY, SELL, HOLD = 0, 1, 2
HEAD_SOURCES = ("minute", "hour", "day", "orderbook")
OB_WIDTH = 6

PRESETS = {
    "tiny": dict(conv_channels=4, head_width=8, att_hidden=6, clf_hidden=8),
    "desk": dict(conv_channels=8, head_width=32, att_hidden=16, clf_hidden=32),
    "paper-scale": dict(conv_channels=64, head_width=192, att_hidden=64, clf_hidden=512),
}


@dataclass(frozen=True)
class HeadOutput:
    source: str
    vector: np.ndarray


@dataclass(frozen=True)
class AttentionContext:
    h: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.h, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise InputError("attention context must be finite")
        object.__setattr__(self, "h", arr)


@dataclass(frozen=True)
class AttentionResult:
    energies: np.ndarray
    weights: np.ndarray
    context_vector: np.ndarray


@dataclass(frozen=True)
class DirectionPrediction:
    probs: np.ndarray
    predicted_class: int
    confidence: float
    attention: np.ndarray | None = None

    @property
    def class_name(self) -> str:
        return CLASS_NAMES[self.predicted_class]


def prediction_from_probs(probs: np.ndarray, alphas=None) -> DirectionPrediction:
    cls = int(np.argmax(probs))  # lowest index wins ties
    return DirectionPrediction(probs=probs, predicted_class=cls,
                               confidence=float(probs[cls]), attention=alphas)


@dataclass(frozen=True)
class DirectionModelConfig:
    schema: FeatureSchema = field(default_factory=FeatureSchema)
    conv_channels: int = 8
    head_width: int = 32
    att_hidden: int = 16
    clf_hidden: int = 32
    ctx_width: int = 2
    lambda_l2: float = 1e-5
    preset: str = "desk"

    @classmethod
    def from_preset(cls, preset: str, schema: FeatureSchema | None = None,
                    lambda_l2: float = 1e-5) -> "DirectionModelConfig":
        if preset not in PRESETS:
            raise InputError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
        return cls(schema=schema or FeatureSchema(), lambda_l2=lambda_l2,
                   preset=preset, **PRESETS[preset])

    def conv_layers(self, tf: str) -> list[nn.LayerSpec]:
        channels = len(self.schema.channel_names(tf))
        return [nn.conv1d(channels, self.conv_channels, 5, stride=2), nn.relu(),
                nn.conv1d(self.conv_channels, self.conv_channels, 3, stride=2),
                nn.relu(), nn.flatten()]

    def conv_flat_len(self, tf: str) -> int:
        shape = nn.output_shape(self.conv_layers(tf),
                                (len(self.schema.channel_names(tf)),
                                 self.schema.lookback(tf)))
        return shape[0]

    def proj_layers(self, tf: str) -> list[nn.LayerSpec]:
        width = self.conv_flat_len(tf) + self.schema.sentiment_len
        return [nn.dense(width, self.head_width), nn.tanh()]

    def ob_layers(self) -> list[nn.LayerSpec]:
        return [nn.dense(OB_WIDTH, self.head_width)]

    def att_layers(self) -> list[nn.LayerSpec]:
        return [nn.dense(self.head_width + self.ctx_width, self.att_hidden), nn.tanh(),
                nn.dense(self.att_hidden, 1)]

    def clf_layers(self) -> list[nn.LayerSpec]:
        return [nn.dense(self.head_width, self.clf_hidden), nn.relu(),
                nn.dense(self.clf_hidden, 3), nn.softmax_layer()]

    def chains(self) -> dict[str, list[nn.LayerSpec]]:
        chains = {}
        for tf in ("minute", "hour", "day"):
            chains[f"{tf}.conv."] = self.conv_layers(tf)
            chains[f"{tf}.proj."] = self.proj_layers(tf)
        chains["ob."] = self.ob_layers()
        chains["att."] = self.att_layers()
        chains["clf."] = self.clf_layers()
        return chains

    def build_params(self, rng: np.random.Generator) -> nn.ParameterSet:
        params = nn.ParameterSet()
        for prefix, layers in self.chains().items():
            sub = nn.init_params(layers, rng, prefix=prefix)
            for name, tensor in sub.items():
                params.add(name, tensor)
        return params

    def sidecar(self) -> dict:
        return {"preset": self.preset, "conv_channels": self.conv_channels,
                "head_width": self.head_width, "att_hidden": self.att_hidden,
                "clf_hidden": self.clf_hidden, "ctx_width": self.ctx_width,
                "lambda_l2": self.lambda_l2, "schema_hash": self.schema.schema_hash()}


def attention(heads: list[HeadOutput], ctx: AttentionContext,
              att_layers: list[nn.LayerSpec], params: nn.ParameterSet,
              prefix: str = "att.") -> AttentionResult:
    """Score each head against the market context, softmax, mix.

    The scorer is shared: identical parameters applied to every head.
    """
    if not heads:
        raise InputError("attention requires at least one head")
    d = heads[0].vector.shape[0]
    for head in heads:
        if head.vector.shape != (d,):
            raise ShapeError(f"head {head.source}: width {head.vector.shape} != ({d},)")
    h = ctx.h
    energies = np.array([
        float(nn.forward(att_layers, params, np.concatenate([head.vector, h]),
                         prefix=prefix)[0])
        for head in heads])
    weights = nn.softmax(energies)
    stacked = np.stack([head.vector for head in heads])
    context_vector = weights @ stacked
    return AttentionResult(energies=energies, weights=weights,
                           context_vector=context_vector)


def _ce_mean(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    b = probs.shape[0]
    picked = np.maximum(probs[np.arange(b), labels], LOG_CLAMP_EPS)
    value = float(-np.log(picked).mean())
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    return value, dlogits


def model_forward(config: DirectionModelConfig, params: nn.ParameterSet,
                  inputs: dict, use_attention: bool = True, traces: dict | None = None,
                  ) -> tuple[np.ndarray, np.ndarray, dict]:
    """Batched probs for input arrays; returns (probs, alphas, head outputs)."""
    record = traces is not None
    xs: dict[str, np.ndarray] = {}
    for tf in ("minute", "hour", "day"):
        conv_layers = config.conv_layers(tf)
        if record:
            flat, conv_trace = nn.forward_trace(conv_layers, params, inputs[tf],
                                                prefix=f"{tf}.conv.")
            traces[f"{tf}.conv"] = conv_trace
        else:
            flat = nn.forward(conv_layers, params, inputs[tf], prefix=f"{tf}.conv.")
        proj_in = np.concatenate([flat, inputs["sentiment"]], axis=1)
        proj_layers = config.proj_layers(tf)
        if record:
            xs[tf], proj_trace = nn.forward_trace(proj_layers, params, proj_in,
                                                  prefix=f"{tf}.proj.")
            traces[f"{tf}.proj"] = proj_trace
        else:
            xs[tf] = nn.forward(proj_layers, params, proj_in, prefix=f"{tf}.proj.")
    ob_layers = config.ob_layers()
    if record:
        xs["orderbook"], ob_trace = nn.forward_trace(ob_layers, params, inputs["ob"],
                                                     prefix="ob.")
        traces["ob"] = ob_trace
    else:
        xs["orderbook"] = nn.forward(ob_layers, params, inputs["ob"], prefix="ob.")

    stacked = np.stack([xs[s] for s in HEAD_SOURCES], axis=1)  # (B, n_heads, d)
    if use_attention:
        att_layers = config.att_layers()
        ctx = inputs["ctx"]
        energies = []
        for i, source in enumerate(HEAD_SOURCES):
            a_in = np.concatenate([xs[source], ctx], axis=1)
            if record:
                e, att_trace = nn.forward_trace(att_layers, params, a_in, prefix="att.")
                traces[f"att.{source}"] = att_trace
            else:
                e = nn.forward(att_layers, params, a_in, prefix="att.")
            energies.append(e[:, 0])
        e_mat = np.stack(energies, axis=1)              # (B, n_heads)
        shifted = e_mat - e_mat.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        alphas = exp / exp.sum(axis=1, keepdims=True)
    else:
        alphas = np.full((stacked.shape[0], len(HEAD_SOURCES)),
                         1.0 / len(HEAD_SOURCES))
    context_vec = np.einsum("bn,bnd->bd", alphas, stacked)
    clf_layers = config.clf_layers()
    if record:
        probs, clf_trace = nn.forward_trace(clf_layers, params, context_vec,
                                            prefix="clf.")
        traces["clf"] = clf_trace
        traces["_stacked"] = stacked
        traces["_alphas"] = alphas
    else:
        probs = nn.forward(clf_layers, params, context_vec, prefix="clf.")
    return probs, alphas, xs


def model_loss(config: DirectionModelConfig, params: nn.ParameterSet, inputs: dict,
               labels: np.ndarray, use_attention: bool = True) -> float:
    """Forward-only mean cross-entropy + L2 (for finite-difference checks)."""
    probs, _, _ = model_forward(config, params, inputs, use_attention)
    value, _ = _ce_mean(probs, labels)
    return value + config.lambda_l2 * params.l2_penalty()


def model_loss_and_grads(config: DirectionModelConfig, params: nn.ParameterSet,
                         inputs: dict, labels: np.ndarray, use_attention: bool = True,
                         ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """Mean cross-entropy + L2 through the full multi-head attention graph."""
    traces: dict = {}
    probs, alphas, xs = model_forward(config, params, inputs, use_attention, traces)
    value, dlogits = _ce_mean(probs, labels)
    value += config.lambda_l2 * params.l2_penalty()
    grads: dict[str, np.ndarray] = {}

    clf_layers = config.clf_layers()
    g_c = nn.backward_trace(clf_layers[:-1], params, traces["clf"][:-1], dlogits,
                            grads, prefix="clf.")
    stacked = traces["_stacked"]                       # (B, n, d)
    n_heads = stacked.shape[1]
    dx = {s: alphas[:, i][:, None] * g_c for i, s in enumerate(HEAD_SOURCES)}
    if use_attention:
        d_alpha = np.einsum("bd,bnd->bn", g_c, stacked)
        dot = (d_alpha * alphas).sum(axis=1, keepdims=True)
        d_e = alphas * (d_alpha - dot)                 # softmax backward, per row
        att_layers = config.att_layers()
        d = config.head_width
        for i, source in enumerate(HEAD_SOURCES):
            g_in = nn.backward_trace(att_layers, params, traces[f"att.{source}"],
                                     d_e[:, i][:, None], grads, prefix="att.")
            dx[source] = dx[source] + g_in[:, :d]
    else:
        for source in HEAD_SOURCES:
            dx[source] = g_c / n_heads

    g_ob = nn.backward_trace(config.ob_layers(), params, traces["ob"],
                             dx["orderbook"], grads, prefix="ob.")
    del g_ob
    for tf in ("minute", "hour", "day"):
        proj_layers = config.proj_layers(tf)
        g_proj_in = nn.backward_trace(proj_layers, params, traces[f"{tf}.proj"],
                                      dx[tf], grads, prefix=f"{tf}.proj.")
        flat_len = config.conv_flat_len(tf)
        nn.backward_trace(config.conv_layers(tf), params, traces[f"{tf}.conv"],
                          g_proj_in[:, :flat_len], grads, prefix=f"{tf}.conv.")
    if config.lambda_l2:
        for name, t in params.items():
            if t.trainable and t.regularized and name in grads:
                grads[name] += 2.0 * config.lambda_l2 * t.values
    return value, grads, probs


class DirectionNetwork(BaseEstimator, ClassifierMixin):
    """Multi-head CNN classifier over FeatureFrames with soft attention fusion.

    fit(X, y) accepts either the dict-of-arrays form produced by
    FrameAssembler.batch_inputs (with a "ctx" entry) or a list of
    (FeatureFrame, AttentionContext) pairs.
    """

    def __init__(self, preset="desk", schema=None, learning_rate=0.05, momentum=0.9,
                 epochs=3, batch_size=128, lambda_l2=1e-5, use_attention=True,
                 val_fraction=0.2, grad_clip=5.0, seed=0):
        self.preset = preset
        self.schema = schema
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.lambda_l2 = lambda_l2
        self.use_attention = use_attention
        self.val_fraction = val_fraction
        self.grad_clip = grad_clip
        self.seed = seed

    # -- construction --------------------------------------------------------

    def build(self) -> "DirectionNetwork":
        self.config_ = DirectionModelConfig.from_preset(
            self.preset, self.schema or FeatureSchema(), self.lambda_l2)
        rng = np.random.default_rng(derive_seed(self.seed, "direction-init"))
        self.params_ = self.config_.build_params(rng)
        self.classes_ = np.array([BUY, SELL, HOLD])
        return self

    def _ensure_built(self) -> None:
        if not hasattr(self, "params_"):
            self.build()

    def param_count(self) -> int:
        self._ensure_built()
        return self.params_.total_count()

    # -- inference ------------------------------------------------------------

    def _frame_inputs(self, frame: FeatureFrame, ctx: AttentionContext | None) -> dict:
        self._check_frame(frame)
        h = ctx.h if ctx is not None else np.zeros(self.config_.ctx_width)
        if h.shape != (self.config_.ctx_width,):
            raise ShapeError(f"context width {h.shape} != ({self.config_.ctx_width},)")
        return {"minute": frame.minute_head[None], "hour": frame.hour_head[None],
                "day": frame.day_head[None], "ob": frame.orderbook_vector[None],
                "sentiment": frame.sentiment_window[None], "ctx": h[None]}

    def _check_frame(self, frame: FeatureFrame) -> None:
        schema = self.config_.schema
        if frame.schema_hash and frame.schema_hash != schema.schema_hash():
            raise InputError("frame was assembled under a different feature schema")
        for tf, arr in (("minute", frame.minute_head), ("hour", frame.hour_head),
                        ("day", frame.day_head)):
            if arr.shape != schema.head_shape(tf):
                raise ShapeError(f"{tf} head shape {arr.shape} != "
                                 f"{schema.head_shape(tf)}")

    def predict_frame(self, frame: FeatureFrame,
                      ctx: AttentionContext) -> DirectionPrediction:
        self._ensure_built()
        probs, alphas, _ = model_forward(self.config_, self.params_,
                                         self._frame_inputs(frame, ctx),
                                         use_attention=self.use_attention)
        return prediction_from_probs(probs[0], alphas[0])

    def predict_frame_no_attention(self, frame: FeatureFrame) -> DirectionPrediction:
        self._ensure_built()
        probs, alphas, _ = model_forward(self.config_, self.params_,
                                         self._frame_inputs(frame, None),
                                         use_attention=False)
        return prediction_from_probs(probs[0], alphas[0])

    def predict_proba(self, X) -> np.ndarray:
        self._ensure_built()
        inputs = self._coerce_inputs(X)
        probs, _, _ = model_forward(self.config_, self.params_, inputs,
                                    self.use_attention)
        return probs

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def batch_probs(self, inputs: dict) -> np.ndarray:
        """Fast path for pre-gathered input arrays."""
        self._ensure_built()
        probs, _, _ = model_forward(self.config_, self.params_, inputs,
                                    self.use_attention)
        return probs

    # -- training --------------------------------------------------------------

    def _coerce_inputs(self, X) -> dict:
        if isinstance(X, dict):
            return X
        frames = []
        ctxs = []
        for frame, ctx in X:
            frames.append(frame)
            ctxs.append(ctx.h if isinstance(ctx, AttentionContext) else np.asarray(ctx))
        return {
            "minute": np.stack([f.minute_head for f in frames]),
            "hour": np.stack([f.hour_head for f in frames]),
            "day": np.stack([f.day_head for f in frames]),
            "ob": np.stack([f.orderbook_vector for f in frames]),
            "sentiment": np.stack([f.sentiment_window for f in frames]),
            "ctx": np.stack(ctxs),
        }

    @staticmethod
    def _slice(inputs: dict, idx) -> dict:
        return {k: v[idx] for k, v in inputs.items()}

    def fit(self, X, y):
        self.build()
        inputs = self._coerce_inputs(X)
        n = inputs["minute"].shape[0]
        labels = check_labels(y, n)
        if n == 0:
            raise InputError("empty training set")
        n_val = int(n * self.val_fraction)
        train_idx = np.arange(0, n - n_val)
        val_idx = np.arange(n - n_val, n)
        rng = np.random.default_rng(derive_seed(self.seed, "direction-shuffle"))
        opt = nn.SGD(self.learning_rate, self.momentum)
        self.history_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(train_idx)
            total = 0.0
            batches = 0
            for start in range(0, order.size, self.batch_size):
                idx = order[start:start + self.batch_size]
                value, grads, _ = model_loss_and_grads(
                    self.config_, self.params_, self._slice(inputs, idx), labels[idx],
                    self.use_attention)
                nn.clip_gradients(grads, self.grad_clip)
                opt.step(self.params_, grads)
                total += value
                batches += 1
            record = {"epoch": epoch, "train_loss": total / max(batches, 1),
                      "train_acc": self._accuracy(inputs, labels, train_idx),
                      "val_acc": self._accuracy(inputs, labels, val_idx)}
            self.history_.append(record)
        return self

    def _accuracy(self, inputs: dict, labels: np.ndarray, idx: np.ndarray,
                  chunk: int = 8192) -> float:
        if idx.size == 0:
            return float("nan")
        hits = 0
        for start in range(0, idx.size, chunk):
            part = idx[start:start + chunk]
            probs, _, _ = model_forward(self.config_, self.params_,
                                        self._slice(inputs, part), self.use_attention)
            hits += int((np.argmax(probs, axis=1) == labels[part]).sum())
        return hits / idx.size

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        nn.save_params(path, self.params_)
        sidecar = dict(self.config_.sidecar())
        sidecar["use_attention"] = self.use_attention
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def load(cls, path, schema: FeatureSchema | None = None,
             **kwargs) -> "DirectionNetwork":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        schema = schema or FeatureSchema()
        if sidecar["schema_hash"] != schema.schema_hash():
            raise InputError(f"{path}: checkpoint was trained under a different "
                             f"feature schema; refusing to serve mismatched frames")
        net = cls(preset=sidecar["preset"], schema=schema,
                  lambda_l2=sidecar["lambda_l2"],
                  use_attention=sidecar.get("use_attention", True), **kwargs)
        net.config_ = DirectionModelConfig(
            schema=schema, conv_channels=sidecar["conv_channels"],
            head_width=sidecar["head_width"], att_hidden=sidecar["att_hidden"],
            clf_hidden=sidecar["clf_hidden"], ctx_width=sidecar["ctx_width"],
            lambda_l2=sidecar["lambda_l2"], preset=sidecar["preset"])
        net.params_ = nn.load_params(path)
        for name in net.params_.names():
            net.params_[name].regularized = name.endswith(".w")
        net.classes_ = np.array([BUY, SELL, HOLD])
        return net


def predict_no_attention(frame: FeatureFrame, model: DirectionNetwork) -> DirectionPrediction:
    return model.predict_frame_no_attention(frame)


def param_count(model: DirectionNetwork) -> int:
    return model.param_count()
