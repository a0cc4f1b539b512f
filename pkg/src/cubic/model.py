"""Fusion model: shared per-stock embedding, max/mean/min pooling across
stocks, an MLP over the flattened window of pooled vectors, and a head with
two logits per code bit.

Shapes used throughout (``B`` batch, ``T`` window, ``N`` stocks, ``M``
features)::

    x        (B, T, N, M)
    embed    (B, T, N, E)
    pooled   (B, T, 3E)          <max, mean, min>
    backbone (B, T*3E) -> hidden_dim x n_hidden
    logits   (B, 2K)             pair k = (logit of 0, logit of 1)
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from . import codec
from .autograd import Tensor, as_tensor, concat, dropout, symmetric_mean
from .errors import ConfigError, NonFiniteActivationError

INIT_SCHEMES = (
    "xavier_uniform", "xavier_normal",
    "kaiming_uniform_fan_in", "kaiming_normal_fan_in",
    "kaiming_uniform_fan_out", "kaiming_normal_fan_out",
    "normal_0.01",
)


@dataclass(frozen=True)
class ModelConfig:
    n_stocks: int
    n_features: int = 16
    window: int = 5
    embed_dim: int = 32
    hidden_dim: int = 128
    n_hidden: int = 3
    out_dim: int = 2 * codec.N_BITS
    dropout_p: float = 0.1
    init_scheme: str = "xavier_uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.out_dim != 2 * codec.N_BITS:
            raise ConfigError(f"out_dim must be {2 * codec.N_BITS}, got {self.out_dim}")
        if min(self.n_stocks, self.n_features, self.window, self.embed_dim,
               self.hidden_dim, self.n_hidden) < 1:
            raise ConfigError("model dimensions must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must be in [0, 1)")
        if self.init_scheme not in INIT_SCHEMES:
            raise ConfigError(f"unknown init scheme {self.init_scheme!r}; choose from {INIT_SCHEMES}")

    @property
    def n_bits(self) -> int:
        return self.out_dim // 2

    def layer_shapes(self) -> list[tuple[str, int, int]]:
        e, h = self.embed_dim, self.hidden_dim
        layers = [("emb0", self.n_features, e), ("emb1", e, e)]
        width = self.window * 3 * e
        for i in range(self.n_hidden):
            layers.append((f"hid{i}", width, h))
            width = h
        layers.append(("head", width, self.out_dim))
        return layers

    def to_dict(self) -> dict:
        return asdict(self)


class ModelParams(dict):
    """Ordered ``name -> float64 array``; weights are ``(fan_in, fan_out)``."""

    def copy(self) -> "ModelParams":
        return ModelParams((k, v.copy()) for k, v in self.items())

    def as_tensors(self) -> dict[str, Tensor]:
        return {k: Tensor(v, requires_grad=True, name=k) for k, v in self.items()}

    def n_values(self) -> int:
        return sum(v.size for v in self.values())

    def equals(self, other: Mapping[str, np.ndarray]) -> bool:
        return list(self) == list(other) and all(np.array_equal(self[k], other[k]) for k in self)


def init_weight(scheme: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    shape = (fan_in, fan_out)
    if scheme == "xavier_uniform":
        a = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-a, a, shape)
    if scheme == "xavier_normal":
        return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), shape)
    if scheme.startswith("kaiming_"):
        fan = fan_in if scheme.endswith("fan_in") else fan_out
        if "_uniform_" in scheme:
            bound = np.sqrt(6.0 / fan)
            return rng.uniform(-bound, bound, shape)
        return rng.normal(0.0, np.sqrt(2.0 / fan), shape)
    if scheme == "normal_0.01":
        return rng.normal(0.0, 0.01, shape)
    raise ConfigError(f"unknown init scheme {scheme!r}")


def init_params(cfg: ModelConfig) -> ModelParams:
    rng = np.random.default_rng(cfg.seed)
    params = ModelParams()
    for name, fan_in, fan_out in cfg.layer_shapes():
        params[f"{name}.w"] = init_weight(cfg.init_scheme, fan_in, fan_out, rng)
        params[f"{name}.b"] = np.zeros(fan_out)
    return params


def _check(t: Tensor, layer: str) -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NonFiniteActivationError(layer)
    return t


def _linear(x: Tensor, params: Mapping, name: str) -> Tensor:
    return x @ as_tensor(params[f"{name}.w"]) + as_tensor(params[f"{name}.b"])


def embed_stock(x, params: Mapping) -> Tensor:
    """Shared two-layer embedding applied along the last axis."""
    x = as_tensor(x)
    w0 = params["emb0.w"]
    if x.shape[-1] != np.shape(w0)[0]:
        raise ValueError(f"expected {np.shape(w0)[0]} features, got {x.shape[-1]}")
    h = _check(_linear(x, params, "emb0").relu(), "emb0")
    return _check(_linear(h, params, "emb1"), "emb1")


def pool(embeddings, axis: int = -2) -> Tensor:
    """Concatenate elementwise max, mean and min over the stock axis."""
    e = as_tensor(embeddings)
    if e.shape[axis] == 0:
        raise ValueError("pool needs at least one stock")
    return concat([e.max(axis), symmetric_mean(e, axis), e.min(axis)], axis=-1)


def forward_logits(x, params: Mapping, cfg: ModelConfig, *, train: bool = False,
                   rng: np.random.Generator | None = None) -> Tensor:
    """Logits for a batch of windows ``(B, T, N, M)``.

    Dropout is applied only when ``train`` is set and an ``rng`` is given.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise ValueError(f"expected (batch, window, stocks, features), got shape {x.shape}")
    if x.shape[1] != cfg.window or x.shape[3] != cfg.n_features:
        raise ValueError(f"window/features {x.shape[1]}/{x.shape[3]} do not match config "
                         f"{cfg.window}/{cfg.n_features}")
    drop_rng = rng if train else None
    pooled = pool(embed_stock(x, params), axis=2)
    h = pooled.reshape(x.shape[0], -1)
    for i in range(cfg.n_hidden):
        h = _check(_linear(h, params, f"hid{i}").relu(), f"hid{i}")
        h = dropout(h, cfg.dropout_p, drop_rng)
    return _check(_linear(h, params, "head"), "head")


@dataclass(frozen=True, eq=False)
class PredictionOutput:
    """Decoded view of a batch of logits (leading axes are batch axes)."""

    logits: np.ndarray
    bit_probs: np.ndarray
    predicted_bits: np.ndarray
    decoded_v: np.ndarray
    gc_mean: np.ndarray
    gc_trend: np.ndarray

    @property
    def chosen_probs(self) -> np.ndarray:
        return np.take_along_axis(self.bit_probs, self.predicted_bits[..., None].astype(np.int64),
                                  axis=-1)[..., 0]

    def equals(self, other: "PredictionOutput") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("logits", "bit_probs", "predicted_bits", "decoded_v",
                             "gc_mean", "gc_trend"))


def pair_probabilities(logits) -> np.ndarray:
    """Per-pair softmax, shape ``(..., K, 2)``.

    Written as a logistic of the logit gap so the larger probability is never
    below 0.5 in floating point.
    """
    o = np.asarray(logits, dtype=np.float64)
    pairs = o.reshape(*o.shape[:-1], -1, 2)
    d = pairs[..., 1] - pairs[..., 0]
    e = np.exp(-np.abs(d))
    big = 1.0 / (1.0 + e)
    small = e / (1.0 + e)
    p1 = np.where(d >= 0, big, small)
    p0 = np.where(d >= 0, small, big)
    return np.stack([p0, p1], axis=-1)


def predict_from_logits(logits) -> PredictionOutput:
    o = np.asarray(logits, dtype=np.float64)
    probs = pair_probabilities(o)
    # ties resolve to bit 1
    bits = (probs[..., 1] >= probs[..., 0]).astype(np.int8)
    chosen = np.maximum(probs[..., 0], probs[..., 1])
    gc_mean = np.clip(np.exp(np.log(chosen).mean(axis=-1)), 0.5, 1.0)
    gc_trend = chosen[..., 0]
    return PredictionOutput(o, probs, bits, codec.decode(bits), gc_mean, gc_trend)


def forward(window, params: Mapping, cfg: ModelConfig, mode: str = "eval",
            rng: np.random.Generator | None = None) -> PredictionOutput:
    """Predict for one window ``(T, N, M)`` or a batch ``(B, T, N, M)``."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(window, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    logits = forward_logits(x, params, cfg, train=mode == "train", rng=rng).data
    return predict_from_logits(logits[0] if single else logits)
