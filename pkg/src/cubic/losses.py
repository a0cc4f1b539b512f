"""Position-weighted bit cross-entropy and the confidence regularizer.

Losses accept logits as arrays or :class:`~cubic.autograd.Tensor` objects of
shape ``(2K,)`` or ``(B, 2K)`` and average over the batch.  The returned
:class:`LossBreakdown` holds plain floats plus the graph node of the total for
``backward``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor, as_tensor
from .model import PredictionOutput

VARIANTS = ("ce_only", "ce+conf_mean", "ce+conf_trend")
_ALIASES = {"ce+mean": "ce+conf_mean", "ce+trend": "ce+conf_trend",
            "mean": "ce+conf_mean", "trend": "ce+conf_trend"}


def normalize_variant(variant: str) -> str:
    v = _ALIASES.get(variant, variant)
    if v not in VARIANTS:
        raise ValueError(f"unknown loss variant {variant!r}; choose from {VARIANTS}")
    return v


@dataclass(frozen=True, eq=False)
class BitWeights:
    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or len(w) < 1 or np.any(w <= 0):
            raise ValueError("bit weights must be a non-empty positive vector")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("bit weights must sum to 1")
        if np.any(np.diff(w) > 0):
            raise ValueError("bit weights must be non-increasing")

    def __len__(self) -> int:
        return len(self.w)


def default_weights(k: int) -> BitWeights:
    if k < 1:
        raise ValueError("need at least one bit")
    raw = 2.0 ** -np.arange(k)
    return BitWeights(raw / raw.sum())


@dataclass(frozen=True)
class LossBreakdown:
    l_ce: float
    l_conf: float
    l_total: float
    gc_used: str | None
    graph: Tensor | None = field(default=None, repr=False, compare=False)


def _prepare(truth, logits, n_bits: int) -> tuple[np.ndarray, Tensor]:
    o = as_tensor(logits)
    bits = np.asarray(truth)
    if o.ndim == 1:
        o = o.reshape(1, -1)
    if bits.ndim == 1:
        bits = bits[None]
    if o.shape[-1] != 2 * n_bits or bits.shape[-1] != n_bits or bits.shape[0] != o.shape[0]:
        raise ValueError(f"dimension mismatch: logits {o.shape}, truth {bits.shape}, "
                         f"{n_bits} weights")
    return bits.astype(np.int64), o


def _pair_log_probs(o: Tensor, n_bits: int) -> Tensor:
    return o.reshape(o.shape[0], n_bits, 2).log_softmax(axis=-1)


def _weighted_ce(bits: np.ndarray, lp: Tensor, w: BitWeights) -> Tensor:
    onehot = np.eye(2)[bits]
    nll = -(lp * onehot).sum(axis=-1)
    return (nll * w.w).sum(axis=-1).mean()


def weighted_ce(truth, logits, w: BitWeights) -> float:
    bits, o = _prepare(truth, logits, len(w))
    return _weighted_ce(bits, _pair_log_probs(o, len(w)), w).item()


def gc_mean(output: PredictionOutput):
    return output.gc_mean


def gc_trend(output: PredictionOutput):
    return output.gc_trend


def _confidence_reg(bits: np.ndarray, lp: Tensor, variant: str) -> Tensor:
    """Batch mean of ``s * GC``; ``s`` is held constant for differentiation."""
    chosen = (lp.data[..., 1] >= lp.data[..., 0]).astype(np.int64)
    lp_chosen = (lp * np.eye(2)[chosen]).sum(axis=-1)
    if variant == "mean":
        gc = lp_chosen.mean(axis=-1).exp()
    elif variant == "trend":
        gc = lp_chosen[:, 0].exp()
    else:
        raise ValueError(f"confidence variant must be 'mean' or 'trend', got {variant!r}")
    true0 = bits[:, 0]
    rows = np.arange(len(true0))
    favored = lp.data[rows, 0, true0] > lp.data[rows, 0, 1 - true0]
    sign = np.where(favored, -1.0, 1.0)
    return (gc * sign).mean()


def confidence_reg(truth_bit0, output_or_logits, variant: str) -> float:
    """``(1 - 2 * [p(true trend bit) > p(other)]) * GC`` for one prediction.

    Accepts a :class:`PredictionOutput` (uses its probabilities) or logits.
    """
    if variant not in ("mean", "trend"):
        raise ValueError(f"confidence variant must be 'mean' or 'trend', got {variant!r}")
    if isinstance(output_or_logits, PredictionOutput):
        probs = output_or_logits.bit_probs
        if probs.ndim == 3:
            b0 = np.asarray(truth_bit0, dtype=np.int64)
            rows = np.arange(len(b0))
            favored = probs[rows, 0, b0] > probs[rows, 0, 1 - b0]
        else:
            b0 = int(truth_bit0)
            favored = probs[0, b0] > probs[0, 1 - b0]
        gc = output_or_logits.gc_mean if variant == "mean" else output_or_logits.gc_trend
        return float(np.mean(np.where(favored, -1.0, 1.0) * gc))
    o = as_tensor(output_or_logits)
    if o.ndim == 1:
        o = o.reshape(1, -1)
    n_bits = o.shape[-1] // 2
    b0 = np.atleast_1d(np.asarray(truth_bit0, dtype=np.int64))
    bits = np.zeros((len(b0), n_bits), dtype=np.int64)
    bits[:, 0] = b0
    return _confidence_reg(bits, _pair_log_probs(o, n_bits), variant).item()


def total_loss(truth, logits, w: BitWeights, variant: str = "ce_only",
               conf_weight: float = 1.0) -> LossBreakdown:
    variant = normalize_variant(variant)
    bits, o = _prepare(truth, logits, len(w))
    lp = _pair_log_probs(o, len(w))
    ce = _weighted_ce(bits, lp, w)
    if variant == "ce_only":
        return LossBreakdown(ce.item(), 0.0, ce.item(), None, ce)
    gc_used = variant.rsplit("_", 1)[1]
    conf = _confidence_reg(bits, lp, gc_used)
    if conf_weight != 1.0:
        conf = conf * conf_weight
    total = ce + conf
    l_ce, l_conf = ce.item(), conf.item()
    return LossBreakdown(l_ce, l_conf, l_ce + l_conf, gc_used, total)
