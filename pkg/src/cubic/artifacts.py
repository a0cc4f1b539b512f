"""On-disk artifacts: a deterministic binary bundle format, the ingested
dataset and model checkpoints.

Bundle layout::

    b"CUBICBND"                 magic
    uint32 LE                   format version
    uint64 LE                   header length in bytes
    header                      UTF-8 JSON, sorted keys: {"meta": ..., "arrays": [[name, dtype, shape], ...]}
    array payloads              little-endian, C order, concatenated in header order

Nothing time- or host-dependent is written, so equal inputs give equal bytes.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .codec import TargetScaler
from .errors import CheckpointError, DataError
from .market_data import AlignedPanel, StockSeries, TargetSeries
from .model import ModelConfig, ModelParams

MAGIC = b"CUBICBND"
VERSION = 1
_DTYPES = {"float64": "<f8", "int64": "<i8", "int8": "i1"}


def save_bundle(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    specs, blobs = [], []
    for name, arr in arrays.items():
        a = np.asarray(arr)
        kind = a.dtype.name
        if kind not in _DTYPES:
            raise TypeError(f"unsupported dtype {kind} for {name}")
        specs.append([name, kind, list(a.shape)])
        blobs.append(np.ascontiguousarray(a, dtype=_DTYPES[kind]).tobytes())
    header = json.dumps({"meta": meta, "arrays": specs}, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def load_bundle(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"artifact not found: {path}")
    buf = path.read_bytes()
    if buf[:8] != MAGIC or len(buf) < 8 + struct.calcsize("<IQ"):
        raise CheckpointError(f"{path}: not a bundle file")
    version, hlen = struct.unpack_from("<IQ", buf, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported bundle version {version}")
    pos = 8 + struct.calcsize("<IQ")
    try:
        header = json.loads(buf[pos:pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"{path}: corrupt header") from None
    pos += hlen
    arrays = {}
    for name, kind, shape in header["arrays"]:
        dtype = np.dtype(_DTYPES[kind])
        count = int(np.prod(shape))
        if pos + count * dtype.itemsize > len(buf):
            raise CheckpointError(f"{path}: truncated payload for {name}")
        arrays[name] = np.frombuffer(buf, dtype=dtype, count=count, offset=pos).reshape(shape).astype(kind)
        pos += count * dtype.itemsize
    if pos != len(buf):
        raise CheckpointError(f"{path}: trailing or missing bytes")
    return header["meta"], arrays


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


_COLS = ("open", "high", "low", "close", "volume")


def save_dataset(path: str | Path, panel: AlignedPanel, target: TargetSeries,
                 bounds: tuple[int, int, int]) -> None:
    stocks = np.stack([np.column_stack([getattr(s, c) for c in _COLS]) for s in panel.stocks])
    index = np.column_stack([getattr(panel.index, c) for c in _COLS])
    meta = {
        "kind": "dataset",
        "dates": [d.isoformat() for d in panel.dates],
        "symbols": [s.symbol for s in panel.stocks],
        "index_symbol": panel.index.symbol,
        "split_sizes": list(bounds),
        "target_mean": target.mean,
        "target_std": target.std,
    }
    save_bundle(path, meta, {"stocks": stocks, "index": index,
                             "target_raw": target.raw, "target_standardized": target.standardized})


def load_dataset(path: str | Path) -> tuple[AlignedPanel, dict]:
    meta, arrays = load_bundle(path)
    if meta.get("kind") != "dataset":
        raise DataError(f"{path}: not a dataset artifact")
    dates = np.array([dt.date.fromisoformat(d) for d in meta["dates"]], dtype=object)

    def series(symbol: str, cols: np.ndarray) -> StockSeries:
        return StockSeries(symbol, dates, *(cols[:, i].copy() for i in range(5)))

    stocks = tuple(series(sym, arrays["stocks"][i]) for i, sym in enumerate(meta["symbols"]))
    return AlignedPanel(dates, stocks, series(meta["index_symbol"], arrays["index"])), meta


def save_checkpoint(path: str | Path, mcfg: ModelConfig, params: ModelParams, scaler: TargetScaler,
                    feature_stats: tuple[np.ndarray, np.ndarray, np.ndarray],
                    extra: dict | None = None) -> None:
    meta = {
        "kind": "checkpoint",
        "model_config": mcfg.to_dict(),
        "param_names": list(params),
        "scaler": {"clamp_sigma": scaler.clamp_sigma, "train_mean": scaler.train_mean,
                   "train_std": scaler.train_std},
        **(extra or {}),
    }
    arrays = {f"param/{k}": v for k, v in params.items()}
    mean, std, constant = feature_stats
    arrays["feature_mean"] = np.asarray(mean, dtype=np.float64)
    arrays["feature_std"] = np.asarray(std, dtype=np.float64)
    arrays["feature_constant"] = np.asarray(constant, dtype=np.int8)
    save_bundle(path, meta, arrays)


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, ModelParams, TargetScaler, tuple, dict]:
    meta, arrays = load_bundle(path)
    if meta.get("kind") != "checkpoint":
        raise CheckpointError(f"{path}: not a checkpoint")
    mcfg = ModelConfig(**meta["model_config"])
    params = ModelParams((k, arrays[f"param/{k}"]) for k in meta["param_names"])
    expected = {f"{name}.{p}": (fi, fo) if p == "w" else (fo,)
                for name, fi, fo in mcfg.layer_shapes() for p in ("w", "b")}
    for k, shape in expected.items():
        if k not in params or params[k].shape != shape:
            raise CheckpointError(f"{path}: parameter {k} missing or mis-shaped")
    scaler = TargetScaler(**meta["scaler"])
    stats = (arrays["feature_mean"], arrays["feature_std"], arrays["feature_constant"].astype(bool))
    return mcfg, params, scaler, stats, meta
