"""The ingest -> train -> evaluate -> backtest stages behind the CLI.

Each stage reads and writes artifacts in the run's output directory; the file
names are fixed so later stages find earlier outputs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts, evaluation
from .backtest import TradingConfig, run_backtest, write_plot_csv
from .config import RunConfig
from .dataset import SPLITS, Featurized, featurize
from .errors import CheckpointError
from .indicators import write_feature_csv
from .market_data import align, load_csv
from .model import ModelConfig
from .training import predict, train

log = logging.getLogger(__name__)

DATASET = "dataset.bnd"
CHECKPOINT = "checkpoint.bnd"
EPOCH_LOG = "train_epochs.csv"
BATCH_LOG = "train_batches.csv"
TRAIN_SUMMARY = "train_summary.json"
EVALUATE_JSON = "evaluate.json"
BACKTEST_JSON = "backtest.json"
PLOT_GUIDED = "backtest_confidence_guided.csv"
PLOT_BASELINE = "backtest_baseline.csv"
PLOT_EQUITY = "plot_equity.csv"
PLOT_TRAINING = "plot_training.csv"


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_config(cfg: RunConfig, n_stocks: int) -> ModelConfig:
    return ModelConfig(n_stocks=n_stocks, seed=cfg.seed, **cfg.model)


def ingest(cfg: RunConfig, dump_features: bool = False) -> dict:
    paths = list(cfg.data.constituents)
    with ThreadPoolExecutor(max_workers=min(8, len(paths))) as pool:
        stocks = list(pool.map(load_csv, paths))
    index = load_csv(cfg.data.index)
    panel = align(stocks, index)
    bounds = cfg.split.sizes(len(panel))
    fz = featurize(panel, cfg.split, cfg.indicators, cfg.window, cfg.clamp_sigma)
    out = _out(cfg)
    artifacts.save_dataset(out / DATASET, panel, fz.target, bounds)
    if dump_features:
        write_feature_csv(fz.features, out / "features.csv")
    summary = {
        "n_stocks": panel.n_stocks,
        "n_dates": len(panel),
        "first_date": panel.dates[0].isoformat(),
        "last_date": panel.dates[-1].isoformat(),
        "split_days": dict(zip(SPLITS, bounds)),
        "split_samples": {s: int(len(fz.sample_dates(s))) for s in SPLITS},
        "indicator_valid_from": fz.features.valid_from,
    }
    return summary


def _load_featurized(cfg: RunConfig, feature_stats=None) -> Featurized:
    path = Path(cfg.output_dir) / DATASET
    panel, _ = artifacts.load_dataset(path)
    return featurize(panel, cfg.split, cfg.indicators, cfg.window, cfg.clamp_sigma, feature_stats)


def train_stage(cfg: RunConfig) -> dict:
    fz = _load_featurized(cfg)
    mcfg = _model_config(cfg, fz.panel.n_stocks)
    params, history = train(fz.samples("train"), fz.samples("val"), mcfg, cfg.train)
    out = _out(cfg)
    feats = fz.features
    artifacts.save_checkpoint(out / CHECKPOINT, mcfg, params, fz.scaler,
                              (feats.mean, feats.std, feats.constant),
                              {"indicators": cfg.to_dict()["indicators"],
                               "symbols": list(feats.symbols), "best_epoch": history.best_epoch})
    with (out / EPOCH_LOG).open("w", newline="", encoding="utf-8") as fh:
        cols = ["epoch", "train_loss", "train_l_ce", "train_l_conf", "val_ic", "val_da"]
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in history.epochs:
            w.writerow({k: ("" if row[k] is None else repr(row[k])) for k in cols})
    with (out / BATCH_LOG).open("w", newline="", encoding="utf-8") as fh:
        cols = ["epoch", "batch", "l_ce", "l_conf", "l_total"]
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in history.batches:
            w.writerow({k: repr(row[k]) for k in cols})
    summary = {
        "config": cfg.to_dict(),
        "best_epoch": history.best_epoch,
        "chosen": history.best(),
        "epochs_run": len(history.epochs),
        "stopped_early": history.stopped_early,
        "checkpoint_sha256": artifacts.file_digest(out / CHECKPOINT),
    }
    write_json(out / TRAIN_SUMMARY, summary)
    return summary


def _load_model(cfg: RunConfig, checkpoint: str | Path | None):
    path = Path(checkpoint) if checkpoint else Path(cfg.output_dir) / CHECKPOINT
    mcfg, params, scaler, stats, meta = artifacts.load_checkpoint(path)
    fz = _load_featurized(cfg, stats)
    if fz.panel.n_stocks != mcfg.n_stocks:
        raise CheckpointError(f"checkpoint expects {mcfg.n_stocks} stocks, data has {fz.panel.n_stocks}")
    if fz.window != mcfg.window:
        raise CheckpointError(f"checkpoint window {mcfg.window} != config window {fz.window}")
    if fz.features.values.shape[-1] != mcfg.n_features:
        raise CheckpointError(f"checkpoint expects {mcfg.n_features} features")
    return mcfg, params, scaler, fz, path


def evaluate_stage(cfg: RunConfig, checkpoint: str | Path | None = None, split: str = "test") -> dict:
    mcfg, params, scaler, fz, path = _load_model(cfg, checkpoint)
    samples = fz.samples(split)
    out = predict(samples, params, mcfg)
    pred_std = scaler.clamp_sigma * out.decoded_v
    block = evaluation.metric_block(pred_std, samples.y_std)
    report = {
        "config": cfg.to_dict(),
        "checkpoint_sha256": artifacts.file_digest(path),
        "split": split,
        "metrics": block.to_dict(),
        "mean_gc_mean": float(np.mean(out.gc_mean)),
        "mean_gc_trend": float(np.mean(out.gc_trend)),
    }
    write_json(_out(cfg) / (EVALUATE_JSON if split == "test" else f"evaluate_{split}.json"), report)
    return report


def _backtests(cfg: RunConfig, checkpoint):
    mcfg, params, scaler, fz, path = _load_model(cfg, checkpoint)
    samples = fz.samples("test")
    out = predict(samples, params, mcfg)
    rets = fz.raw_returns("test")
    source = cfg.trading.confidence_source if cfg.trading.confidence_source != "none" else "mean"
    guided_cfg = TradingConfig(cfg.trading.cost_rate, cfg.trading.buckets, source,
                               cfg.trading.trading_days_per_year)
    base_cfg = TradingConfig(cfg.trading.cost_rate, cfg.trading.buckets, "none",
                             cfg.trading.trading_days_per_year)
    conf = out.gc_mean if source == "mean" else out.gc_trend
    preds = scaler.to_raw(out.decoded_v)
    # direction comes from the decoded unit value (the trend bit)
    guided = run_backtest(out.decoded_v, conf, rets, guided_cfg)
    baseline = run_backtest(out.decoded_v, conf, rets, base_cfg)
    return fz.dates("test"), preds, conf, rets, guided, baseline, path, source


def backtest_stage(cfg: RunConfig, checkpoint: str | Path | None = None) -> dict:
    dates, preds, conf, rets, guided, baseline, path, source = _backtests(cfg, checkpoint)
    out = _out(cfg)
    write_plot_csv(out / PLOT_GUIDED, dates, preds, conf, guided)
    write_plot_csv(out / PLOT_BASELINE, dates, preds, conf, baseline)
    report = {
        "config": cfg.to_dict(),
        "checkpoint_sha256": artifacts.file_digest(path),
        "confidence_source": source,
        "baseline": baseline.summary(),
        "confidence_guided": guided.summary(),
        "first_date": dates[0].isoformat(),
        "last_date": dates[-1].isoformat(),
    }
    write_json(out / BACKTEST_JSON, report)
    return report


def plot_data_stage(cfg: RunConfig, checkpoint: str | Path | None = None) -> dict:
    dates, preds, conf, rets, guided, baseline, _, _ = _backtests(cfg, checkpoint)
    out = _out(cfg)
    hold = np.concatenate([[1.0], np.cumprod(1.0 + rets)])
    with (out / PLOT_EQUITY).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "index_return", "buy_and_hold", "baseline", "confidence_guided",
                    "confidence", "guided_position"])
        for i, d in enumerate(dates):
            w.writerow([d.isoformat(), repr(float(rets[i])), repr(float(hold[i + 1])),
                        repr(float(baseline.equity_curve[i + 1])), repr(float(guided.equity_curve[i + 1])),
                        repr(float(conf[i])), repr(float(guided.positions[i]))])
    written = [str(out / PLOT_EQUITY)]
    epoch_log = out / EPOCH_LOG
    if epoch_log.is_file():
        (out / PLOT_TRAINING).write_text(epoch_log.read_text(encoding="utf-8"), encoding="utf-8")
        written.append(str(out / PLOT_TRAINING))
    return {"written": written, "rows": len(dates)}
