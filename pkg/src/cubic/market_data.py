"""OHLCV ingestion, date alignment, target construction and chronological splits.

A :class:`StockSeries` stores its bars column-wise as numpy arrays so that the
indicator code can work on whole columns at once.  Dates are ``datetime.date``
objects kept in a numpy object array.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

HEADER = ["date", "open", "high", "low", "close", "volume"]


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def check(self) -> None:
        """Raise ``ValueError`` if the bar violates the OHLCV invariants."""
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) for p in prices) or not math.isfinite(self.volume):
            raise ValueError("non-finite field")
        if min(prices) <= 0:
            raise ValueError("prices must be strictly positive")
        if self.volume < 0:
            raise ValueError("volume must be non-negative")
        if self.high < self.low:
            raise ValueError("high < low")
        if self.high < max(self.open, self.close):
            raise ValueError("high below open/close")
        if self.low > min(self.open, self.close):
            raise ValueError("low above open/close")


@dataclass(frozen=True, eq=False)
class StockSeries:
    symbol: str
    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.dates)
        for name in ("open", "high", "low", "close", "volume"):
            if len(getattr(self, name)) != n:
                raise DataError(f"{self.symbol}: column {name} has wrong length")
        if n > 1 and not all(a < b for a, b in zip(self.dates[:-1], self.dates[1:])):
            raise DataError(f"{self.symbol}: dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.dates)

    @classmethod
    def from_bars(cls, symbol: str, bars: Sequence[OhlcvBar]) -> "StockSeries":
        bars = sorted(bars, key=lambda b: b.date)
        col = lambda name: np.array([getattr(b, name) for b in bars], dtype=np.float64)  # noqa: E731
        return cls(
            symbol,
            np.array([b.date for b in bars], dtype=object),
            col("open"), col("high"), col("low"), col("close"), col("volume"),
        )

    def bar(self, i: int) -> OhlcvBar:
        return OhlcvBar(self.dates[i], float(self.open[i]), float(self.high[i]),
                        float(self.low[i]), float(self.close[i]), float(self.volume[i]))

    def take(self, idx: np.ndarray) -> "StockSeries":
        return StockSeries(self.symbol, self.dates[idx], self.open[idx], self.high[idx],
                           self.low[idx], self.close[idx], self.volume[idx])

    def slice(self, start: int, stop: int) -> "StockSeries":
        return self.take(np.arange(start, stop))

    def equals(self, other: "StockSeries") -> bool:
        return (
            self.symbol == other.symbol
            and list(self.dates) == list(other.dates)
            and all(np.array_equal(getattr(self, c), getattr(other, c))
                    for c in ("open", "high", "low", "close", "volume"))
        )


@dataclass(frozen=True, eq=False)
class AlignedPanel:
    dates: np.ndarray
    stocks: tuple[StockSeries, ...]
    index: StockSeries

    def __post_init__(self) -> None:
        if not self.stocks:
            raise DataError("panel needs at least one constituent stock")
        for s in (*self.stocks, self.index):
            if list(s.dates) != list(self.dates):
                raise DataError(f"{s.symbol}: dates not aligned with panel")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def n_stocks(self) -> int:
        return len(self.stocks)

    def slice(self, start: int, stop: int) -> "AlignedPanel":
        return AlignedPanel(self.dates[start:stop],
                            tuple(s.slice(start, stop) for s in self.stocks),
                            self.index.slice(start, stop))

    def equals(self, other: "AlignedPanel") -> bool:
        return (list(self.dates) == list(other.dates)
                and len(self.stocks) == len(other.stocks)
                and all(a.equals(b) for a, b in zip(self.stocks, other.stocks))
                and self.index.equals(other.index))


@dataclass(frozen=True, eq=False)
class TargetSeries:
    raw: np.ndarray
    standardized: np.ndarray
    mean: float
    std: float


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float = 0.7
    val_ratio: float = 0.2
    test_ratio: float = 0.1

    def __post_init__(self) -> None:
        ratios = (self.train_ratio, self.val_ratio, self.test_ratio)
        if any(r <= 0 for r in ratios):
            raise ValueError("split ratios must be positive")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {sum(ratios)!r}")

    def sizes(self, total: int) -> tuple[int, int, int]:
        """Segment lengths; flooring remainder goes to the training segment."""
        n_val = math.floor(self.val_ratio * total)
        n_test = math.floor(self.test_ratio * total)
        return total - n_val - n_test, n_val, n_test


def load_csv(path: str | Path, symbol: str | None = None) -> StockSeries:
    """Read one per-symbol OHLCV file.

    Errors carry the 1-based line number of the offending row (the header is
    line 1).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    symbol = symbol or path.stem
    bars: list[OhlcvBar] = []
    seen: dict[dt.date, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != HEADER:
            raise DataError(f"{path}: expected header {','.join(HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(HEADER):
                raise DataError(f"{path}: malformed row {lineno}: expected 6 fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0].strip())
                o, h, lo, c, v = (float(x) for x in row[1:])
            except ValueError as exc:
                raise DataError(f"{path}: malformed row {lineno}: {exc}") from None
            bar = OhlcvBar(date, o, h, lo, c, v)
            try:
                bar.check()
            except ValueError as exc:
                raise DataError(f"{path}: invariant violated at row {lineno}: {exc}") from None
            if date in seen:
                raise DataError(f"{path}: duplicate date {date} at row {lineno} "
                                f"(first seen at row {seen[date]})")
            seen[date] = lineno
            bars.append(bar)
    if not bars:
        raise DataError(f"{path}: no data rows")
    return StockSeries.from_bars(symbol, bars)


def write_csv(series: StockSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for i in range(len(series)):
            b = series.bar(i)
            w.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low),
                        repr(b.close), repr(b.volume)])


def _restrict(series: StockSeries, dates: list) -> StockSeries:
    pos = {d: i for i, d in enumerate(series.dates)}
    return series.take(np.array([pos[d] for d in dates], dtype=np.int64))


def align(stocks: Sequence[StockSeries], index: StockSeries) -> AlignedPanel:
    """Restrict every series to the dates all of them share."""
    if not stocks:
        raise DataError("align needs at least one stock")
    if len(index) == 0:
        raise DataError("index series is empty")
    common = set(index.dates)
    for s in stocks:
        common &= set(s.dates)
    if not common:
        raise DataError("empty date intersection across stocks and index")
    dates = sorted(common)
    return AlignedPanel(np.array(dates, dtype=object),
                        tuple(_restrict(s, dates) for s in stocks),
                        _restrict(index, dates))


def compute_target(index: StockSeries | np.ndarray, train_len: int) -> TargetSeries:
    """Next-day returns, standardized with population statistics of the first
    ``train_len`` returns."""
    closes = index.close if isinstance(index, StockSeries) else np.asarray(index, dtype=np.float64)
    if len(closes) < 2:
        raise DataError("index needs at least 2 values")
    if not 1 <= train_len <= len(closes) - 1:
        raise DataError(f"train_len must be in [1, {len(closes) - 1}], got {train_len}")
    raw = (closes[1:] - closes[:-1]) / closes[:-1]
    head = raw[:train_len]
    mean = float(np.mean(head))
    std = float(np.std(head))
    if std == 0.0:
        raise DataError("target std is zero over the training prefix (constant index)")
    return TargetSeries(raw, (raw - mean) / std, mean, std)


def split_chronological(panel: AlignedPanel, spec: SplitSpec) -> tuple[AlignedPanel, AlignedPanel, AlignedPanel]:
    total = len(panel)
    n_train, n_val, n_test = spec.sizes(total)
    for name, n in (("train", n_train), ("val", n_val), ("test", n_test)):
        if n <= 0:
            raise DataError(f"empty {name} segment for {total} dates")
    a, b = n_train, n_train + n_val
    return panel.slice(0, a), panel.slice(a, b), panel.slice(b, total)
