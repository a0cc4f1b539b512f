"""Mini-batch training with Adam (decoupled weight decay) and IC-based model
selection."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import evaluation
from .errors import ConfigError, DegenerateMetricError, TrainingDivergedError
from .losses import default_weights, normalize_variant, total_loss
from .model import ModelConfig, ModelParams, forward_logits, init_params, predict_from_logits

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 50
    early_stop_patience: int = 10
    loss_variant: str = "ce_only"
    conf_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "loss_variant", normalize_variant(self.loss_variant))
        if self.learning_rate < 0 or self.weight_decay < 0 or self.eps <= 0:
            raise ConfigError("learning_rate/weight_decay must be >= 0 and eps > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must be in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ConfigError("batch_size, max_epochs and early_stop_patience must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Windows into a feature tensor.

    ``features[j]`` holds the stock features of panel date ``offset + j``;
    sample ``i`` is the window ending at panel date ``t[i]`` and its target
    is the standardized return from ``t[i]`` to ``t[i] + 1``.
    """

    features: np.ndarray
    offset: int
    window: int
    t: np.ndarray
    bits: np.ndarray
    y_std: np.ndarray

    def __post_init__(self) -> None:
        if len(self.t) and (self.t.min() - self.offset - self.window + 1) < 0:
            raise ValueError("sample windows reach before the first feature row")

    def __len__(self) -> int:
        return len(self.t)

    def windows(self, idx=None) -> np.ndarray:
        t = self.t if idx is None else self.t[idx]
        rows = (t - self.offset)[:, None] + np.arange(1 - self.window, 1)
        return self.features[rows]


class Adam:
    """Adam with decoupled weight decay, updating arrays in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps, self.wd = lr, beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                g = np.zeros_like(p)
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.wd:
                p -= self.lr * self.wd * p
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainLog:
    epochs: list[dict] = field(default_factory=list)
    batches: list[dict] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    def best(self) -> dict | None:
        for row in self.epochs:
            if row["epoch"] == self.best_epoch:
                return row
        return None


def predict(samples: SampleSet, params, cfg: ModelConfig, batch_size: int = 256):
    """Eval-mode predictions for every sample, batched."""
    outs = []
    for lo in range(0, len(samples), batch_size):
        idx = np.arange(lo, min(lo + batch_size, len(samples)))
        outs.append(forward_logits(samples.windows(idx), params, cfg).data)
    logits = np.concatenate(outs) if outs else np.zeros((0, cfg.out_dim))
    return predict_from_logits(logits)


def validation_metrics(samples: SampleSet, params, cfg: ModelConfig) -> dict:
    out = predict(samples, params, cfg)
    try:
        ic = evaluation.ic(out.decoded_v, samples.y_std)
    except DegenerateMetricError:
        ic = None
    return {"val_ic": ic, "val_da": evaluation.direction_accuracy(out.decoded_v, samples.y_std)}


def train(train_set: SampleSet, val_set: SampleSet, mcfg: ModelConfig, tcfg: TrainConfig,
          params: ModelParams | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> tuple[ModelParams, TrainLog]:
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    params = init_params(mcfg) if params is None else params.copy()
    weights = default_weights(mcfg.n_bits)
    opt = Adam(params, tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.eps, tcfg.weight_decay)
    order_rng = np.random.default_rng(tcfg.seed)
    drop_rng = np.random.default_rng([tcfg.seed, 1])
    history = TrainLog()
    best_params = params.copy()
    best_score = -np.inf
    since_best = 0
    n = len(train_set)
    for epoch in range(1, tcfg.max_epochs + 1):
        perm = order_rng.permutation(n)
        sums = np.zeros(3)
        for b, lo in enumerate(range(0, n, tcfg.batch_size)):
            idx = perm[lo:lo + tcfg.batch_size]
            leaves = params.as_tensors()
            logits = forward_logits(train_set.windows(idx), leaves, mcfg, train=True, rng=drop_rng)
            loss = total_loss(train_set.bits[idx], logits, weights, tcfg.loss_variant, tcfg.conf_weight)
            if not np.isfinite(loss.l_total):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.graph.backward()
            opt.step({k: t.grad for k, t in leaves.items()})
            sums += np.array([loss.l_ce, loss.l_conf, loss.l_total]) * len(idx)
            history.batches.append({"epoch": epoch, "batch": b, "l_ce": loss.l_ce,
                                    "l_conf": loss.l_conf, "l_total": loss.l_total})
        if not all(np.all(np.isfinite(p)) for p in params.values()):
            raise TrainingDivergedError(f"non-finite parameters after epoch {epoch}")
        row = {"epoch": epoch, "train_l_ce": sums[0] / n, "train_l_conf": sums[1] / n,
               "train_loss": sums[2] / n, **validation_metrics(val_set, params, mcfg)}
        history.epochs.append(row)
        score = -np.inf if row["val_ic"] is None else row["val_ic"]
        if history.best_epoch is None or score > best_score:
            best_score, history.best_epoch = score, epoch
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
        log.info("epoch %d loss %.5f val_ic %s val_da %.4f", epoch, row["train_loss"],
                 row["val_ic"], row["val_da"])
        if on_epoch is not None:
            on_epoch(row)
        if since_best >= tcfg.early_stop_patience:
            history.stopped_early = True
            break
    return best_params, history
