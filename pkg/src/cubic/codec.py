"""Fixed-point binary codes for targets in [-1, 1].

A code of ``K`` bits represents ``v = -1 + sum_k bits[k] * 2**-k`` with bit 0
the most significant (it alone decides the sign: ``v >= 0`` iff bit 0 is 1).
Quantization floors onto the grid of step ``2**-(K-1)`` and saturates at the
top code, so 1.0 maps to ``1 - 2**-(K-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_BITS = 15


@dataclass(frozen=True)
class TargetScaler:
    """Bridges standardized returns and the unit interval of the codec."""

    clamp_sigma: float = 3.0
    train_mean: float = 0.0
    train_std: float = 1.0

    def __post_init__(self) -> None:
        if not self.clamp_sigma > 0:
            raise ValueError("clamp_sigma must be positive")

    def to_raw(self, v):
        """Unit value -> raw return estimate."""
        return unscale(v, self) * self.train_std + self.train_mean


def scale_to_unit(y_std, scaler: TargetScaler):
    return np.clip(np.asarray(y_std, dtype=np.float64) / scaler.clamp_sigma, -1.0, 1.0)


def unscale(v, scaler: TargetScaler):
    return np.asarray(v, dtype=np.float64) * scaler.clamp_sigma


def _place_values(k: int) -> np.ndarray:
    return 2.0 ** -np.arange(k)


def quantize(v, k: int = N_BITS) -> np.ndarray:
    """Integer grid index ``q`` with ``v ~= -1 + q * 2**-(k-1)``."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(~np.isfinite(v)) or np.any(np.abs(v) > 1.0):
        raise ValueError("encode expects values in [-1, 1]")
    q = np.floor((v + 1.0) * 2.0 ** (k - 1)).astype(np.int64)
    return np.minimum(q, 2**k - 1)


def encode(v, k: int = N_BITS) -> np.ndarray:
    """Bits of ``v`` (shape ``v.shape + (k,)``, dtype int8, MSB first)."""
    q = quantize(v, k)
    shifts = np.arange(k - 1, -1, -1)
    return ((q[..., None] >> shifts) & 1).astype(np.int8)


def decode(bits) -> np.ndarray | float:
    b = np.asarray(bits)
    if b.ndim == 0 or b.shape[-1] < 1:
        raise ValueError("decode expects at least one bit")
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    out = -1.0 + b.astype(np.float64) @ _place_values(b.shape[-1])
    return float(out) if np.ndim(out) == 0 else out


def to_string(bits) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).ravel())


def from_string(s: str) -> np.ndarray:
    if not s or set(s) - {"0", "1"}:
        raise ValueError(f"not a bit string: {s!r}")
    return np.array([int(c) for c in s], dtype=np.int8)
