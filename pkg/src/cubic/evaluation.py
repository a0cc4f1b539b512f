"""Prediction metrics for a single index series.

IC here is the time-series Pearson correlation over the evaluation window and
ICIR is the mean over standard deviation of ICs on non-overlapping 21-day
sub-windows.  With one index there is no cross-section, so these numbers are
not directly comparable to cross-sectional (per-day) IC figures.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateMetricError

EPS = 1e-12
DEFAULT_WINDOW = 21


@dataclass(frozen=True)
class MetricBlock:
    ic: float | None
    icir: float | None
    da: float
    n_days: int
    window: int
    flags: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if len(p) != len(a):
        raise ValueError(f"length mismatch: {len(p)} predictions vs {len(a)} actuals")
    return p, a


def ic(pred, actual) -> float:
    p, a = _pair(pred, actual)
    if len(p) < 2:
        raise ValueError("IC needs at least 2 observations")
    dp, da = p - p.mean(), a - a.mean()
    sp, sa = math.sqrt(float(dp @ dp)), math.sqrt(float(da @ da))
    if sp < EPS or sa < EPS:
        raise DegenerateMetricError("IC undefined: zero variance in "
                                    + ("predictions" if sp < EPS else "actuals"))
    return float(np.clip((dp @ da) / (sp * sa), -1.0, 1.0))


def window_ics(pred, actual, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """IC of each complete non-overlapping window; ``nan`` where undefined."""
    p, a = _pair(pred, actual)
    n_win = len(p) // window
    if n_win < 2:
        raise ValueError(f"ICIR needs at least 2 complete {window}-day windows, got {len(p)} days")
    out = np.empty(n_win)
    for j in range(n_win):
        sl = slice(j * window, (j + 1) * window)
        try:
            out[j] = ic(p[sl], a[sl])
        except DegenerateMetricError:
            out[j] = np.nan
    return out


def icir_from_ics(ics) -> tuple[float, bool]:
    """Mean over population std of window ICs, and whether the std was ~0."""
    x = np.asarray(ics, dtype=np.float64)
    x = x[np.isfinite(x)]
    if len(x) < 2:
        raise DegenerateMetricError("ICIR needs at least 2 defined window ICs")
    std = float(np.std(x))
    degenerate = std < EPS
    return float(np.mean(x)) / max(std, EPS), degenerate


def icir(pred, actual, window: int = DEFAULT_WINDOW) -> tuple[float, bool]:
    """Returns ``(value, degenerate)``; a degenerate value is ``mean / EPS``."""
    return icir_from_ics(window_ics(pred, actual, window))


def direction_accuracy(pred, actual) -> float:
    """Fraction of matching signs, counting 0 as positive."""
    p, a = _pair(pred, actual)
    if len(p) < 1:
        raise ValueError("DA needs at least one observation")
    return float(np.mean((p >= 0) == (a >= 0)))


def metric_block(pred, actual, window: int = DEFAULT_WINDOW) -> MetricBlock:
    """All three metrics; undefined values become ``None`` with a flag."""
    p, a = _pair(pred, actual)
    flags: list[str] = []
    try:
        ic_v: float | None = ic(p, a)
    except DegenerateMetricError as exc:
        ic_v = None
        flags.append(f"ic: {exc}")
    try:
        icir_v, degenerate = icir(p, a, window)
        if degenerate:
            flags.append("icir: zero std of window ICs (value guarded)")
        icir_out: float | None = icir_v
    except (DegenerateMetricError, ValueError) as exc:
        icir_out = None
        flags.append(f"icir: {exc}")
    return MetricBlock(ic_v, icir_out, direction_accuracy(p, a), len(p), window, tuple(flags))
