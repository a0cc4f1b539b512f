"""Synthetic panels whose next-day index direction is a known linear function
of pooled (mean-over-stocks) standardized indicator features."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .indicators import FEATURE_NAMES, IndicatorConfig, compute_indicator_panel
from .market_data import AlignedPanel, SplitSpec, StockSeries, write_csv

# bounded oscillators, stationary by construction
SIGNAL_FEATURES = ("rsi", "k", "mfi")


@dataclass(frozen=True, eq=False)
class SyntheticPanel:
    panel: AlignedPanel
    feature_idx: np.ndarray
    weights: np.ndarray
    score: np.ndarray        # per panel date from valid_from; nan before
    valid_from: int


def trading_dates(n: int, start: dt.date = dt.date(2015, 1, 1)) -> np.ndarray:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return np.array(out, dtype=object)


def _random_stock(symbol: str, dates: np.ndarray, rng: np.random.Generator) -> StockSeries:
    n = len(dates)
    close = 50.0 * np.exp(np.cumsum(rng.normal(0.0, 0.015, n)))
    prev = np.concatenate([[close[0]], close[:-1]])
    open_ = prev * np.exp(rng.normal(0.0, 0.005, n))
    high = np.maximum(open_, close) * np.exp(np.abs(rng.normal(0.0, 0.006, n)))
    low = np.minimum(open_, close) * np.exp(-np.abs(rng.normal(0.0, 0.006, n)))
    volume = np.round(rng.lognormal(13.0, 0.3, n))
    return StockSeries(symbol, dates, open_, high, low, close, volume)


def _index_from_returns(dates: np.ndarray, returns: np.ndarray) -> StockSeries:
    close = 1000.0 * np.concatenate([[1.0], np.cumprod(1.0 + returns)])
    open_ = np.concatenate([[close[0]], close[:-1]])
    high = np.maximum(open_, close) * 1.001
    low = np.minimum(open_, close) * 0.999
    return StockSeries("INDEX", dates, open_, high, low, close, np.full(len(dates), 1e9))


def make_synthetic_panel(n_stocks: int = 20, n_days: int = 1500, seed: int = 0,
                         noise: float = 0.05, split: SplitSpec | None = None,
                         icfg: IndicatorConfig | None = None) -> SyntheticPanel:
    """Build stocks as random walks, then drive the index so that
    ``sign(return[t]) = sign(w . pooled[t] + noise * std * eps)``.

    ``pooled[t]`` is the mean over stocks of the training-standardized
    features listed in ``SIGNAL_FEATURES`` at date ``t``.
    """
    rng = np.random.default_rng(seed)
    split = split or SplitSpec()
    icfg = icfg or IndicatorConfig()
    dates = trading_dates(n_days)
    stocks = tuple(_random_stock(f"S{i:02d}", dates, rng) for i in range(n_stocks))
    n_train = split.sizes(n_days)[0]
    # placeholder index only to build a panel for the indicator pass
    tmp = AlignedPanel(dates, stocks, _index_from_returns(dates, np.zeros(n_days - 1)))
    feats = compute_indicator_panel(tmp, icfg, train_end=n_train)
    idx = np.array([FEATURE_NAMES.index(f) for f in SIGNAL_FEATURES])
    weights = rng.normal(0.0, 1.0, len(idx))
    pooled = feats.values[:, :, idx].mean(axis=1)
    score_valid = pooled @ weights
    noisy = score_valid + noise * score_valid.std() * rng.normal(size=len(score_valid))
    returns = rng.normal(0.0, 0.008, n_days - 1)
    start = feats.valid_from
    size = rng.uniform(0.004, 0.012, n_days - 1 - start)
    returns[start:] = np.where(noisy[:-1] >= 0, 1.0, -1.0) * size
    score = np.full(n_days, np.nan)
    score[start:] = score_valid
    panel = AlignedPanel(dates, stocks, _index_from_returns(dates, returns))
    return SyntheticPanel(panel, idx, weights, score, start)


def write_synthetic(out_dir: str | Path, **kwargs) -> dict:
    """Write per-symbol CSVs plus a manifest dict for a run config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    syn = make_synthetic_panel(**kwargs)
    paths = []
    for s in syn.panel.stocks:
        p = out / f"{s.symbol}.csv"
        write_csv(s, p)
        paths.append(str(p))
    index_path = out / "INDEX.csv"
    write_csv(syn.panel.index, index_path)
    return {"index": str(index_path), "constituents": paths}
