"""Run configuration: one YAML (or JSON) file with a section per stage.

Example::

    seed: 7
    output_dir: runs/demo
    data:
      index: data/INDEX.csv
      constituents: [data/S00.csv, data/S01.csv]
    split: {train_ratio: 0.7, val_ratio: 0.2, test_ratio: 0.1}
    indicators: {n_osc: 14, n_ma: 20}
    codec: {clamp_sigma: 3.0}
    model: {embed_dim: 32, hidden_dim: 128, init_scheme: xavier_uniform}
    train: {max_epochs: 50, loss_variant: ce+conf_trend}
    trading: {cost_rate: 0.001, confidence_source: mean}

The run-level ``seed`` overrides ``model.seed`` and ``train.seed``.  Relative
data paths resolve against the config file's directory.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .backtest import TradingConfig
from .errors import ConfigError
from .indicators import IndicatorConfig
from .market_data import SplitSpec
from .training import TrainConfig

SECTIONS = ("data", "split", "indicators", "codec", "model", "train", "trading")
MODEL_KEYS = ("window", "embed_dim", "hidden_dim", "n_hidden", "dropout_p", "init_scheme")


@dataclass(frozen=True)
class DataManifest:
    index: str
    constituents: tuple[str, ...]

    def validate(self) -> None:
        if not self.constituents:
            raise ConfigError("data.constituents must list at least one file")
        for p in (self.index, *self.constituents):
            if not Path(p).is_file():
                raise ConfigError(f"data file does not exist: {p}")


@dataclass(frozen=True)
class RunConfig:
    data: DataManifest
    split: SplitSpec = SplitSpec()
    indicators: IndicatorConfig = IndicatorConfig()
    clamp_sigma: float = 3.0
    model: dict = field(default_factory=dict)
    train: TrainConfig = TrainConfig()
    trading: TradingConfig = TradingConfig()
    output_dir: str = "run"
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "data": {"index": self.data.index, "constituents": list(self.data.constituents)},
            "split": dataclasses.asdict(self.split),
            "indicators": dataclasses.asdict(self.indicators),
            "codec": {"clamp_sigma": self.clamp_sigma},
            "model": dict(self.model),
            "train": self.train.to_dict(),
            "trading": self.trading.to_dict(),
        }

    @property
    def window(self) -> int:
        return int(self.model.get("window", 5))


def _build(cls, section: str, values: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def _resolve(path: str, base: Path | None) -> str:
    p = Path(path)
    if base is not None and not p.is_absolute():
        p = base / p
    return str(p)


def from_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    raw = dict(raw)
    unknown = set(raw) - set(SECTIONS) - {"seed", "output_dir"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    seed = int(raw.get("seed", 0))
    data = raw.get("data") or {}
    if "index" not in data or "constituents" not in data:
        raise ConfigError("config needs data.index and data.constituents")
    manifest = DataManifest(_resolve(data["index"], base_dir),
                            tuple(_resolve(p, base_dir) for p in data["constituents"]))
    model = dict(raw.get("model") or {})
    bad = set(model) - set(MODEL_KEYS) - {"seed", "n_stocks", "n_features", "out_dim"}
    if bad:
        raise ConfigError(f"unknown keys in [model]: {sorted(bad)}")
    model = {k: v for k, v in model.items() if k in MODEL_KEYS}
    train = dict(raw.get("train") or {})
    train["seed"] = seed
    trading = dict(raw.get("trading") or {})
    if "buckets" in trading:
        trading["buckets"] = tuple(tuple(b) for b in trading["buckets"])
    codec_section = raw.get("codec") or {}
    if set(codec_section) - {"clamp_sigma"}:
        raise ConfigError(f"unknown keys in [codec]: {sorted(set(codec_section) - {'clamp_sigma'})}")
    clamp = float(codec_section.get("clamp_sigma", 3.0))
    if clamp <= 0:
        raise ConfigError("codec.clamp_sigma must be positive")
    return RunConfig(
        data=manifest,
        split=_build(SplitSpec, "split", raw.get("split") or {}),
        indicators=_build(IndicatorConfig, "indicators", raw.get("indicators") or {}),
        clamp_sigma=clamp,
        model=model,
        train=_build(TrainConfig, "train", train),
        trading=_build(TradingConfig, "trading", trading),
        output_dir=str(raw.get("output_dir", "run")),
        seed=seed,
    )


def _parse_value(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def apply_overrides(raw: dict, assignments: list[str]) -> dict:
    """Apply ``section.key=value`` strings (values parsed as YAML scalars)."""
    out = json.loads(json.dumps(raw))
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-section")
        node[parts[-1]] = _parse_value(value)
    return out


def read_raw(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def load_config(path: str | Path, overrides: list[str] | None = None, seed: int | None = None,
                output_dir: str | None = None, validate_paths: bool = True) -> RunConfig:
    raw = apply_overrides(read_raw(path), overrides or [])
    if seed is not None:
        raw["seed"] = seed
    if output_dir is not None:
        raw["output_dir"] = output_dir
    cfg = from_dict(raw, Path(path).resolve().parent)
    if validate_paths:
        cfg.data.validate()
    return cfg
