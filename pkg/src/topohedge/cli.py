"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 numeric divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cliquet import payout_series
from .errors import NumericDivergenceError, NumericError, TopoHedgeError
from .evaluator import evaluate, rolling_mean
from .heston import PathSet
from .plots import curve_svg, histogram_svg
from .protocol import run_protocol
from .tda import rolling_tda_batch
from .trainer import (
    TrainConfig,
    load_checkpoint,
    read_log,
    save_checkpoint,
    simulate_batch,
    test_seed,
    train,
    write_log,
)

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("topohedge")


class UsageError(Exception):
    pass


def _check_writable(path, force: bool) -> Path:
    p = Path(path)
    if p.exists() and not force:
        raise FileExistsError(f"{p} exists; pass --force to overwrite")
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load_config(args, **overrides) -> TrainConfig:
    if not args.config:
        raise UsageError("--config is required")
    if not Path(args.config).is_file():
        raise UsageError(f"config file not found: {args.config}")
    return TrainConfig.load(args.config, **overrides)


def _on_off(value: str | None) -> bool | None:
    return None if value is None else value == "on"


def cmd_simulate(args) -> None:
    cfg = _load_config(args)
    out = _check_writable(args.out, args.force)
    seed = cfg.seed if args.seed is None else args.seed
    paths = simulate_batch(cfg, seed, args.paths)
    paths.to_csv(out)


def cmd_train(args) -> None:
    cfg = _load_config(
        args, batch_size=args.batch, steps=args.steps, use_tda=_on_off(args.tda),
        seed=args.seed, learning_rate=args.lr,
    )
    cfg.workers = args.workers
    if args.clip_norm is not None:
        cfg.clip_norm = args.clip_norm
    model = _check_writable(args.out_model, args.force)
    params, rows = train(
        cfg, checkpoint_path=model if args.checkpoint_every else None,
        checkpoint_every=args.checkpoint_every, resume_from=args.resume,
    )
    save_checkpoint(model, params, cfg)
    if args.log:
        write_log(_check_writable(args.log, args.force), rows)


def _eval_paths(args, cfg: TrainConfig) -> PathSet:
    if args.paths:
        return PathSet.from_csv(args.paths, dt=cfg.dt)
    seed = test_seed(cfg.seed) if args.seed is None else args.seed
    return simulate_batch(cfg, seed, args.n_paths)


def cmd_eval(args) -> None:
    params, _, _, conf = load_checkpoint(args.model)
    if conf is None:
        raise UsageError("checkpoint carries no config")
    cfg = TrainConfig.from_dict(conf)
    paths = _eval_paths(args, cfg)
    report = evaluate(params, paths, cfg.cliquet, params.feature_dim == 5, cfg.window_size)
    report.save_json(_check_writable(args.report, args.force))
    if args.per_path:
        report.save_per_path(_check_writable(args.per_path, args.force))
    if args.hist:
        report.save_histogram(_check_writable(args.hist, args.force))


def cmd_plot(args) -> None:
    if bool(args.hist) == bool(args.log):
        raise UsageError("give exactly one of --hist or --log")
    if args.hist:
        with open(args.hist, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise UsageError(f"histogram file {args.hist} has no bins")
        svg = histogram_svg(
            [float(r["bin_left"]) for r in rows],
            [float(r["bin_right"]) for r in rows],
            [int(r["count"]) for r in rows],
        )
    else:
        rows = read_log(args.log)
        if not rows:
            raise UsageError(f"training log {args.log} is empty")
        curve = rolling_mean([r["mean_abs_trade"] for r in rows], args.window)
        svg = curve_svg(curve, f"Average trade size, rolling window {args.window}")
    _check_writable(args.out, args.force).write_text(svg)


def cmd_features(args) -> None:
    cfg = _load_config(args)
    paths = PathSet.from_csv(args.paths, dt=cfg.dt)
    psi = payout_series(paths.spot, cfg.cliquet)
    l1, l2 = rolling_tda_batch(np.stack([paths.spot, paths.variance, psi], axis=-1), cfg.window_size)
    with open(_check_writable(args.out, args.force), "w", newline="") as fh:
        fh.write("path_id,step,l1,l2\n")
        for p in range(paths.n_paths):
            for t in range(paths.spot.shape[1]):
                fh.write(f"{p},{t},{float(l1[p, t])!r},{float(l2[p, t])!r}\n")


def cmd_repro(args) -> None:
    cfg = _load_config(args)
    if args.steps is not None:
        cfg = replace(cfg, steps=args.steps)
    batches = tuple(int(b) for b in args.batches.split(","))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports, logs, params, table = run_protocol(cfg, batches, test_paths=args.test_paths)
    for name, rep in reports.items():
        rep.save_json(out / f"{name}_report.json")
        rep.save_histogram(out / f"{name}_hist.csv")
        write_log(out / f"{name}_log.csv", logs[name])
        save_checkpoint(out / f"{name}_model.json", params[name], replace(
            cfg, batch_size=int(name.rsplit("_b", 1)[1]), use_tda=name.startswith("tda")))
    with open(out / "comparison.csv", "w", newline="") as fh:
        fh.write("label,pnl_std,pnl_min,mean_abs_trade\n")
        for r in table:
            fh.write(f"{r['label']},{r['pnl_std']!r},{r['pnl_min']!r},{r['mean_abs_trade']!r}\n")
    for r in table:
        print(f"{r['label']:>12}  std={r['pnl_std']:.4e}  min={r['pnl_min']:.4f}  "
              f"mean|delta|={r['mean_abs_trade']:.4f}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topohedge", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a PathSet to CSV")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--paths", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="train a hedging policy")
    t.add_argument("--config")
    t.add_argument("--tda", choices=["on", "off"])
    t.add_argument("--batch", type=int)
    t.add_argument("--steps", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--out-model", required=True)
    t.add_argument("--log")
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--clip-norm", type=float)
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.add_argument("--resume")
    t.add_argument("--force", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a test PathSet")
    e.add_argument("--model", required=True)
    e.add_argument("--paths", help="PathSet CSV; omitted -> simulate a fresh test set")
    e.add_argument("--n-paths", type=int, default=50_000)
    e.add_argument("--seed", type=int)
    e.add_argument("--report", required=True)
    e.add_argument("--per-path")
    e.add_argument("--hist")
    e.add_argument("--force", action="store_true")
    e.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="render a histogram or rolling trade-size SVG")
    p.add_argument("--hist")
    p.add_argument("--log")
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_plot)

    f = sub.add_parser("features", help="dump rolling TDA features of a PathSet")
    f.add_argument("--config")
    f.add_argument("--paths", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--force", action="store_true")
    f.set_defaults(func=cmd_features)

    r = sub.add_parser("repro", help="run the four-model comparison")
    r.add_argument("--config")
    r.add_argument("--out-dir", required=True)
    r.add_argument("--steps", type=int)
    r.add_argument("--batches", default="20,1000")
    r.add_argument("--test-paths", type=int, default=50_000)
    r.set_defaults(func=cmd_repro)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (NumericDivergenceError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, TopoHedgeError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
