"""Command-line entry point: ``cubic <subcommand> --config run.yaml``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import pipeline
from .config import load_config
from .errors import CubicError

log = logging.getLogger("cubic")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", required=True, help="run config (YAML or JSON)")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubic", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    ing = sub.add_parser("ingest", parents=[common], help="load, align and split the CSV panel")
    ing.add_argument("--dump-features", action="store_true",
                     help="also write features.csv (one row per date and stock)")
    sub.add_parser("train", parents=[common], help="train and write the checkpoint and logs")
    ev = sub.add_parser("evaluate", parents=[common], help="IC / ICIR / DA on a split")
    ev.add_argument("--checkpoint")
    ev.add_argument("--split", choices=("train", "val", "test"), default="test")
    bt = sub.add_parser("backtest", parents=[common], help="baseline and confidence-guided backtests")
    bt.add_argument("--checkpoint")
    pd = sub.add_parser("plot-data", parents=[common], help="write CSVs for equity and training plots")
    pd.add_argument("--checkpoint")
    syn = sub.add_parser("make-synthetic", help="write a synthetic learnable panel and a config for it")
    syn.add_argument("out_dir")
    syn.add_argument("--stocks", type=int, default=20)
    syn.add_argument("--days", type=int, default=1500)
    syn.add_argument("--seed", type=int, default=0)
    return parser


def _table(rows: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in rows)
    fmt = lambda v: f"{v:.6f}" if isinstance(v, float) else ("n/a" if v is None else str(v))  # noqa: E731
    return "\n".join(f"{k.ljust(width)}  {fmt(v)}" for k, v in rows)


def _make_synthetic(args) -> int:
    from .synthetic import write_synthetic

    out = Path(args.out_dir)
    manifest = write_synthetic(out / "data", n_stocks=args.stocks, n_days=args.days, seed=args.seed)
    rel = lambda p: str(Path(p).relative_to(out))  # noqa: E731
    cfg = {
        "seed": args.seed,
        "output_dir": str((out / "run").resolve()),
        "data": {"index": rel(manifest["index"]), "constituents": [rel(p) for p in manifest["constituents"]]},
        "split": {"train_ratio": 0.7, "val_ratio": 0.2, "test_ratio": 0.1},
        "train": {"max_epochs": 50, "loss_variant": "ce_only"},
        "trading": {"cost_rate": 0.001, "confidence_source": "mean"},
    }
    path = out / "config.yaml"
    path.write_text(yaml.safe_dump(cfg, sort_keys=False), encoding="utf-8")
    print(f"wrote {len(manifest['constituents'])} constituents and {path}")
    return 0


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "make-synthetic":
        return _make_synthetic(args)
    cfg = load_config(args.config, args.set, args.seed, args.out)
    if args.command == "ingest":
        s = pipeline.ingest(cfg, args.dump_features)
        print(_table([("stocks", s["n_stocks"]), ("dates", s["n_dates"]),
                      ("range", f"{s['first_date']} .. {s['last_date']}"),
                      *((f"{k} days", v) for k, v in s["split_days"].items()),
                      *((f"{k} samples", v) for k, v in s["split_samples"].items())]))
    elif args.command == "train":
        s = pipeline.train_stage(cfg)
        chosen = s["chosen"] or {}
        print(_table([("epochs run", s["epochs_run"]), ("best epoch", s["best_epoch"]),
                      ("val IC", chosen.get("val_ic")), ("val DA", chosen.get("val_da")),
                      ("checkpoint", s["checkpoint_sha256"][:16])]))
    elif args.command == "evaluate":
        r = pipeline.evaluate_stage(cfg, args.checkpoint, args.split)
        m = r["metrics"]
        print(_table([("split", r["split"]), ("days", m["n_days"]), ("IC", m["ic"]),
                      ("ICIR", m["icir"]), ("DA", m["da"])]))
        for flag in m["flags"]:
            print(f"note: {flag}")
    elif args.command == "backtest":
        r = pipeline.backtest_stage(cfg, args.checkpoint)
        rows = []
        for name in ("baseline", "confidence_guided"):
            b = r[name]
            rows += [(f"{name} SR", b["sr"]), (f"{name} AR", b["ar"]), (f"{name} trades", b["n_trades"])]
        print(_table(rows))
    elif args.command == "plot-data":
        r = pipeline.plot_data_stage(cfg, args.checkpoint)
        print(json.dumps(r, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except CubicError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
