"""The sixteen per-stock technical indicators used as model inputs.

Every series function returns an array with the same length as its input.
Positions before an indicator's warm-up hold ``nan``; EMA-based series are
defined from the first bar because the EMA is seeded with the first value.

Degenerate divisions are guarded with ``EPS``:

* RSI / MFI: no losses (no negative flow) -> 100, no gains (no positive flow)
  -> 0, neither -> 50.
* Stochastic K: flat high/low range -> 50.
* ADX: zero directional movement -> 0.

The ADX column is the single-smoothing form
``100 * |DM+ - DM-| / (DM+ + DM-)`` over Wilder-smoothed DM sums (the
classical DX), not the textbook double-smoothed ADX.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError
from .market_data import AlignedPanel, OhlcvBar, StockSeries

EPS = 1e-12

FEATURE_NAMES = (
    "arithmetic_ratio", "open", "close", "close_sma", "volume_sma", "close_ema",
    "volume_ema", "adx", "rsi", "macd", "macd_signal", "k", "mfi", "atr",
    "bb_middle", "obv",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class IndicatorConfig:
    n_osc: int = 14
    n_ma: int = 20
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal_n: int = 9

    def __post_init__(self) -> None:
        for name in ("n_osc", "n_ma", "macd_fast", "macd_slow", "macd_signal_n"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if self.macd_fast >= self.macd_slow:
            raise ValueError("macd_fast must be < macd_slow")

    def warmups(self) -> dict[str, int]:
        """Index of the first bar at which each feature counts as defined."""
        n, m = self.n_osc, self.n_ma
        macd = self.macd_slow - 1
        return {
            "arithmetic_ratio": 0, "open": 0, "close": 0,
            "close_sma": m - 1, "volume_sma": m - 1,
            "close_ema": m - 1, "volume_ema": m - 1,
            "adx": n, "rsi": n, "macd": macd,
            "macd_signal": macd + self.macd_signal_n - 1,
            "k": n - 1, "mfi": n, "atr": n - 1, "bb_middle": m - 1, "obv": 0,
        }

    def valid_from(self) -> int:
        return max(self.warmups().values())


@dataclass(frozen=True, eq=False)
class IndicatorPanel:
    """Per-stock feature vectors from ``valid_from`` onwards.

    ``values`` has shape ``(len(dates), n_stocks, 16)`` and row ``j`` belongs
    to panel date ``valid_from + j``.  When standardization statistics are
    attached, ``values`` is standardized and ``raw`` keeps the levels.
    """

    dates: np.ndarray
    symbols: tuple[str, ...]
    values: np.ndarray
    raw: np.ndarray
    valid_from: int
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    constant: np.ndarray | None = None

    @property
    def standardized(self) -> bool:
        return self.mean is not None


def _columns(bars) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(bars, StockSeries):
        return bars.open, bars.high, bars.low, bars.close, bars.volume
    s = StockSeries.from_bars("_", list(bars))
    return s.open, s.high, s.low, s.close, s.volume


def _as_array(series) -> np.ndarray:
    return np.asarray(series, dtype=np.float64)


def _ratio_index(up: float, down: float) -> float:
    # 100 - 100 / (1 + up/down) == 100 * up / (up + down)
    if down < EPS and up < EPS:
        return 50.0
    if down < EPS:
        return 100.0
    if up < EPS:
        return 0.0
    return 100.0 - 100.0 / (1.0 + up / down)


def arithmetic_ratio(bar: OhlcvBar | None = None, *, open=None, close=None):
    """Open over close, for a single bar or for whole columns."""
    if bar is not None:
        if bar.close <= 0:
            raise ValueError("close must be positive")
        return bar.open / bar.close
    return _as_array(open) / _as_array(close)


def sma(series, n: int) -> np.ndarray:
    x = _as_array(series)
    if n < 1 or len(x) < n:
        raise DataError(f"sma needs at least {n} values, got {len(x)}")
    out = np.full(len(x), np.nan)
    out[n - 1:] = sliding_window_view(x, n).mean(axis=1)
    return out


def ema(series, n: int) -> np.ndarray:
    x = _as_array(series)
    if len(x) == 0:
        raise DataError("ema needs a non-empty series")
    if n < 1:
        raise ValueError("ema span must be >= 1")
    k = 2.0 / (n + 1)
    out = np.empty(len(x))
    acc = x[0]
    out[0] = acc
    for t in range(1, len(x)):
        acc = k * x[t] + (1.0 - k) * acc
        out[t] = acc
    return out


def rsi(closes, n: int) -> np.ndarray:
    c = _as_array(closes)
    if len(c) < n + 1:
        raise DataError(f"rsi needs at least {n + 1} closes, got {len(c)}")
    diff = np.diff(c)
    gains = np.where(diff > 0, diff, 0.0)
    losses = np.where(diff < 0, -diff, 0.0)
    out = np.full(len(c), np.nan)
    ag = gains[:n].mean()
    al = losses[:n].mean()
    out[n] = _ratio_index(ag, al)
    for t in range(n + 1, len(c)):
        ag = ((n - 1) * ag + gains[t - 1]) / n
        al = ((n - 1) * al + losses[t - 1]) / n
        out[t] = _ratio_index(ag, al)
    return out


def macd_with_signal(closes, cfg: IndicatorConfig) -> tuple[np.ndarray, np.ndarray]:
    c = _as_array(closes)
    if len(c) < cfg.macd_slow:
        raise DataError(f"macd needs at least {cfg.macd_slow} closes, got {len(c)}")
    line = ema(c, cfg.macd_fast) - ema(c, cfg.macd_slow)
    return line, ema(line, cfg.macd_signal_n)


def stochastic_k(bars, n: int) -> np.ndarray:
    _, high, low, close, _ = _columns(bars)
    if len(close) < n:
        raise DataError(f"stochastic K needs at least {n} bars, got {len(close)}")
    hh = sliding_window_view(high, n).max(axis=1)
    ll = sliding_window_view(low, n).min(axis=1)
    c = close[n - 1:]
    rng = hh - ll
    flat = rng < EPS
    k = np.where(flat, 50.0, (c - ll) / np.where(flat, 1.0, rng) * 100.0)
    out = np.full(len(close), np.nan)
    out[n - 1:] = np.clip(k, 0.0, 100.0)
    return out


def mfi(bars, n: int) -> np.ndarray:
    _, high, low, close, volume = _columns(bars)
    if len(close) < n + 1:
        raise DataError(f"mfi needs at least {n + 1} bars, got {len(close)}")
    tp = (high + low + close) / 3.0
    flow = tp * volume
    d = np.diff(tp)
    pos = np.where(d > 0, flow[1:], 0.0)
    neg = np.where(d < 0, flow[1:], 0.0)
    pos_n = sliding_window_view(pos, n).sum(axis=1)
    neg_n = sliding_window_view(neg, n).sum(axis=1)
    out = np.full(len(close), np.nan)
    out[n:] = [_ratio_index(p, q) for p, q in zip(pos_n, neg_n)]
    return out


def true_range(bars) -> np.ndarray:
    _, high, low, close, _ = _columns(bars)
    tr = high - low
    if len(tr) > 1:
        prev = close[:-1]
        tr[1:] = np.maximum.reduce([high[1:] - low[1:], np.abs(high[1:] - prev),
                                    np.abs(low[1:] - prev)])
    return tr


def atr(bars, n: int) -> np.ndarray:
    tr = true_range(bars)
    if len(tr) < 2:
        raise DataError("atr needs at least 2 bars")
    return ema(tr, n)


def directional_movement(bars) -> tuple[np.ndarray, np.ndarray]:
    """DM+ and DM- for bars 1..end (length len(bars) - 1)."""
    _, high, low, _, _ = _columns(bars)
    up = high[1:] - high[:-1]
    down = low[:-1] - low[1:]
    plus = np.where((up > down) & (up > 0), up, 0.0)
    minus = np.where((down > up) & (down > 0), down, 0.0)
    return plus, minus


def adx(bars, n: int) -> np.ndarray:
    _, high, _, _, _ = _columns(bars)
    if len(high) < n + 1:
        raise DataError(f"adx needs at least {n + 1} bars, got {len(high)}")
    plus, minus = directional_movement(bars)
    out = np.full(len(high), np.nan)
    sp, sm = plus[:n].sum(), minus[:n].sum()

    def dx(p: float, m: float) -> float:
        total = p + m
        return 0.0 if total < EPS else 100.0 * abs(p - m) / total

    out[n] = dx(sp, sm)
    for t in range(n + 1, len(high)):
        sp = sp - sp / n + plus[t - 1]
        sm = sm - sm / n + minus[t - 1]
        out[t] = dx(sp, sm)
    return out


def obv(bars) -> np.ndarray:
    _, _, _, close, volume = _columns(bars)
    if len(close) == 0:
        raise DataError("obv needs a non-empty series")
    step = np.sign(np.diff(close)) * volume[1:]
    return np.concatenate([[0.0], np.cumsum(step)])


def stock_features(series: StockSeries, cfg: IndicatorConfig) -> np.ndarray:
    """All 16 indicator columns for one stock, shape ``(len(series), 16)``."""
    c, v = series.close, series.volume
    close_sma = sma(c, cfg.n_ma)
    line, signal = macd_with_signal(c, cfg)
    cols = {
        "arithmetic_ratio": arithmetic_ratio(open=series.open, close=c),
        "open": series.open,
        "close": c,
        "close_sma": close_sma,
        "volume_sma": sma(v, cfg.n_ma),
        "close_ema": ema(c, cfg.n_ma),
        "volume_ema": ema(v, cfg.n_ma),
        "adx": adx(series, cfg.n_osc),
        "rsi": rsi(c, cfg.n_osc),
        "macd": line,
        "macd_signal": signal,
        "k": stochastic_k(series, cfg.n_osc),
        "mfi": mfi(series, cfg.n_osc),
        "atr": atr(series, cfg.n_osc),
        "bb_middle": close_sma.copy(),
        "obv": obv(series),
    }
    return np.column_stack([cols[name] for name in FEATURE_NAMES])


def standardize(raw: np.ndarray, mean: np.ndarray, std: np.ndarray,
                constant: np.ndarray) -> np.ndarray:
    """Z-score ``raw`` with given statistics; constant features become 0."""
    safe = np.where(constant, 1.0, std)
    return np.where(constant, 0.0, (raw - mean) / safe)


def compute_indicator_panel(panel: AlignedPanel, cfg: IndicatorConfig | None = None,
                            train_end: int | None = None,
                            stats: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None) -> IndicatorPanel:
    """Build the feature tensor for every stock.

    ``train_end`` is the number of leading panel dates that form the training
    segment.  When given, per-feature z-score statistics are pooled over all
    stocks on training dates at or after ``valid_from`` and applied to every
    date; zero-variance features are flagged and set to 0.  Precomputed
    ``stats`` (mean, std, constant mask) take precedence over ``train_end``.
    """
    cfg = cfg or IndicatorConfig()
    start = cfg.valid_from()
    if len(panel) <= start:
        raise DataError(f"panel has {len(panel)} dates; indicators need more than {start}")
    raw = np.stack([stock_features(s, cfg)[start:] for s in panel.stocks], axis=1)
    if not np.all(np.isfinite(raw)):
        bad = np.argwhere(~np.isfinite(raw))[0]
        raise DataError(f"non-finite indicator {FEATURE_NAMES[bad[2]]} for "
                        f"{panel.stocks[bad[1]].symbol} at {panel.dates[start + bad[0]]}")
    symbols = tuple(s.symbol for s in panel.stocks)
    dates = panel.dates[start:]
    if stats is not None:
        mean, std, constant = (np.asarray(a) for a in stats)
        constant = constant.astype(bool)
        return IndicatorPanel(dates, symbols, standardize(raw, mean, std, constant), raw, start,
                              mean, std, constant)
    if train_end is None:
        return IndicatorPanel(dates, symbols, raw, raw, start)
    n_fit = train_end - start
    if n_fit < 1:
        raise DataError(f"training segment ({train_end} dates) ends inside the "
                        f"indicator warm-up ({start} dates)")
    fit = raw[:n_fit].reshape(-1, N_FEATURES)
    mean = fit.mean(axis=0)
    std = fit.std(axis=0)
    constant = std < EPS * np.maximum(1.0, np.abs(mean))
    values = standardize(raw, mean, std, constant)
    return IndicatorPanel(dates, symbols, values, raw, start, mean, std, constant)


def write_feature_csv(features: IndicatorPanel, path: str | Path, *, standardized: bool = False) -> None:
    """One row per (date, stock) with the 16 feature columns."""
    data = features.values if standardized else features.raw
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "stock", *FEATURE_NAMES])
        for j, date in enumerate(features.dates):
            for i, sym in enumerate(features.symbols):
                w.writerow([date.isoformat(), sym, *(repr(float(x)) for x in data[j, i])])
