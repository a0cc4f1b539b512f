"""Confidence-bucketed long/short backtest on the index.

The position chosen from the day-``t`` prediction earns the day ``t -> t+1``
index return.  Costs are ``cost_rate * |position[t] - position[t-1]|`` with a
flat book before the first day, so a trade is any change in position.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateMetricError, RuinError

EPS = 1e-12
DEFAULT_BUCKETS = ((0.5, 0.7, 0.5), (0.7, 1.0, 1.0))


@dataclass(frozen=True)
class TradingConfig:
    cost_rate: float = 0.001
    # (lower, upper, fraction); intervals are [lower, upper) except the last,
    # which is closed so a confidence of exactly 1.0 is covered
    buckets: tuple[tuple[float, float, float], ...] = DEFAULT_BUCKETS
    confidence_source: str = "mean"
    trading_days_per_year: int = 252

    def __post_init__(self) -> None:
        object.__setattr__(self, "buckets", tuple(tuple(float(x) for x in b) for b in self.buckets))
        if self.cost_rate < 0:
            raise ValueError("cost_rate must be non-negative")
        if self.confidence_source not in ("mean", "trend", "none"):
            raise ValueError(f"confidence_source must be mean|trend|none, got {self.confidence_source!r}")
        if self.trading_days_per_year < 1:
            raise ValueError("trading_days_per_year must be positive")
        b = sorted(self.buckets)
        if not b or b[0][0] != 0.5 or b[-1][1] != 1.0:
            raise ValueError("buckets must cover [0.5, 1.0]")
        for (lo, hi, frac), nxt in zip(b, [*b[1:], None]):
            if not lo < hi:
                raise ValueError(f"empty bucket [{lo}, {hi})")
            if not 0.0 <= frac <= 1.0:
                raise ValueError("bucket fractions must be in [0, 1]")
            if nxt is not None and nxt[0] != hi:
                raise ValueError("buckets must be contiguous and disjoint")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["buckets"] = [list(b) for b in self.buckets]
        return d


@dataclass(frozen=True, eq=False)
class BacktestReport:
    positions: np.ndarray
    daily_returns: np.ndarray
    equity_curve: np.ndarray
    sr: float | None
    ar: float | None
    n_trades: int
    total_cost: float
    flags: tuple[str, ...] = field(default=())

    def summary(self) -> dict:
        return {"sr": self.sr, "ar": self.ar, "n_trades": self.n_trades,
                "total_cost": self.total_cost, "n_days": len(self.positions),
                "final_equity": float(self.equity_curve[-1]), "flags": list(self.flags)}


def bucket_fraction(confidence: float, cfg: TradingConfig) -> float:
    buckets = sorted(cfg.buckets)
    for lo, hi, frac in buckets:
        if lo <= confidence < hi:
            return frac
    if confidence == buckets[-1][1]:
        return buckets[-1][2]
    raise ValueError(f"confidence {confidence} outside [0.5, 1]")


def position_from_confidence(direction: int, confidence: float, cfg: TradingConfig) -> float:
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if not 0.5 <= confidence <= 1.0:
        raise ValueError(f"confidence {confidence} outside [0.5, 1]")
    if cfg.confidence_source == "none":
        return float(direction)
    return direction * bucket_fraction(confidence, cfg)


def sharpe(daily_returns, cfg: TradingConfig | None = None) -> float:
    cfg = cfg or TradingConfig()
    r = np.asarray(daily_returns, dtype=np.float64)
    if len(r) < 2:
        raise ValueError("Sharpe ratio needs at least 2 returns")
    std = float(np.std(r))
    if std < EPS:
        raise DegenerateMetricError("Sharpe ratio undefined: zero return variance")
    return float(np.mean(r)) / std * math.sqrt(cfg.trading_days_per_year)


def annualized_return(daily_returns, cfg: TradingConfig | None = None) -> float:
    cfg = cfg or TradingConfig()
    r = np.asarray(daily_returns, dtype=np.float64)
    if len(r) < 1:
        raise ValueError("annualized return needs at least 1 return")
    if np.any(r <= -1.0):
        t = int(np.argmax(r <= -1.0))
        raise RuinError(f"strategy ruined on day {t} (daily return {r[t]})")
    growth = float(np.sum(np.log1p(r)))
    return math.expm1(growth * cfg.trading_days_per_year / len(r))


def run_backtest(decoded_preds, confidences, index_returns, cfg: TradingConfig) -> BacktestReport:
    preds = np.asarray(decoded_preds, dtype=np.float64)
    conf = np.asarray(confidences, dtype=np.float64)
    rets = np.asarray(index_returns, dtype=np.float64)
    if not len(preds) == len(conf) == len(rets):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(conf)} confidences, "
                         f"{len(rets)} returns")
    direction = np.where(preds >= 0, 1, -1)
    positions = np.array([position_from_confidence(int(d), float(c), cfg)
                          for d, c in zip(direction, conf)])
    turnover = np.abs(np.diff(positions, prepend=0.0))
    costs = cfg.cost_rate * turnover
    daily = positions * rets - costs
    equity = np.concatenate([[1.0], np.cumprod(1.0 + daily)])
    flags: list[str] = []
    try:
        sr: float | None = sharpe(daily, cfg)
    except (DegenerateMetricError, ValueError) as exc:
        sr = None
        flags.append(f"sr: {exc}")
    try:
        ar: float | None = annualized_return(daily, cfg)
    except RuinError as exc:
        ar = None
        flags.append(f"ar: {exc}")
    return BacktestReport(positions, daily, equity, sr, ar, int(np.count_nonzero(turnover)),
                          float(costs.sum()), tuple(flags))


def write_plot_csv(path: str | Path, dates, preds, confidences, report: BacktestReport) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "prediction", "confidence", "position", "daily_return", "equity"])
        for i, d in enumerate(dates):
            w.writerow([str(d), repr(float(preds[i])), repr(float(confidences[i])),
                        repr(float(report.positions[i])), repr(float(report.daily_returns[i])),
                        repr(float(report.equity_curve[i + 1]))])
