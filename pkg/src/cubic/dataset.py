"""Turn an aligned panel into model-ready sample sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codec
from .errors import DataError
from .indicators import IndicatorConfig, IndicatorPanel, compute_indicator_panel
from .market_data import AlignedPanel, SplitSpec, TargetSeries, compute_target
from .training import SampleSet

SPLITS = ("train", "val", "test")


@dataclass(frozen=True, eq=False)
class Featurized:
    panel: AlignedPanel
    features: IndicatorPanel
    target: TargetSeries
    scaler: codec.TargetScaler
    bounds: tuple[int, int, int]     # n_train, n_val, n_test (dates)
    window: int

    def sample_dates(self, split: str) -> np.ndarray:
        """Panel indices ``t`` whose window is defined and whose target return
        ``t -> t+1`` lies entirely inside ``split``."""
        n_train, n_val, n_test = self.bounds
        lo, hi = {"train": (0, n_train), "val": (n_train, n_train + n_val),
                  "test": (n_train + n_val, n_train + n_val + n_test)}[split]
        first = self.features.valid_from + self.window - 1
        return np.arange(max(lo, first), hi - 1)

    def samples(self, split: str) -> SampleSet:
        t = self.sample_dates(split)
        y = self.target.standardized[t]
        bits = codec.encode(codec.scale_to_unit(y, self.scaler))
        return SampleSet(self.features.values, self.features.valid_from, self.window, t, bits, y)

    def raw_returns(self, split: str) -> np.ndarray:
        return self.target.raw[self.sample_dates(split)]

    def dates(self, split: str) -> np.ndarray:
        return self.panel.dates[self.sample_dates(split)]


def featurize(panel: AlignedPanel, split: SplitSpec, icfg: IndicatorConfig, window: int,
              clamp_sigma: float = 3.0, feature_stats=None) -> Featurized:
    """Indicators, targets and split bookkeeping for one panel.

    ``feature_stats`` (mean, std, constant mask) reuses the standardization
    of a trained checkpoint instead of refitting it on this panel.
    """
    bounds = split.sizes(len(panel))
    for name, n in zip(SPLITS, bounds):
        if n <= 0:
            raise DataError(f"empty {name} segment for {len(panel)} dates")
    n_train = bounds[0]
    # only returns whose both endpoints are training dates enter the statistics
    target = compute_target(panel.index, n_train - 1)
    features = compute_indicator_panel(panel, icfg, train_end=n_train, stats=feature_stats)
    scaler = codec.TargetScaler(clamp_sigma, target.mean, target.std)
    out = Featurized(panel, features, target, scaler, bounds, window)
    for name in SPLITS:
        if len(out.sample_dates(name)) == 0:
            raise DataError(f"no {name} samples left after indicator warm-up "
                            f"({features.valid_from} dates) and window {window}")
    return out
