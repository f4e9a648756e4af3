"""Command-line entry point.

Usage: eventcast <command> [flags].  Flags shared by every command:

  --config PATH   flat key=value options file
  --seed N        master seed (overrides config key `seed`)
  --profile P     desk | paper model widths (overrides key `profile`)
  --out DIR       artifact directory (default runs/<command>)
  --data DIR      per-state dataset CSVs produced by ingest/synth
  --workers N     tree-training threads; results do not depend on it
"""
from __future__ import annotations

import argparse
import sys

from .configfile import PROFILES, ConfigError, RunConfig
from . import experiments


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value options file")
    sub.add_argument("--seed", type=int, default=None,
                     help="master seed (default: config `seed` or 0)")
    sub.add_argument("--profile", choices=PROFILES, default=None,
                     help="model width profile (default: config or desk)")
    sub.add_argument("--out", default=None,
                     help="output directory (default runs/<command>)")
    sub.add_argument("--data", default=None,
                     help="directory of per-state dataset CSVs")
    sub.add_argument("--workers", type=int, default=None,
                     help="tree-training threads (default: config or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eventcast",
        description="State-level event forecasting from daily news features")
    subs = parser.add_subparsers(dest="command", required=True)

    specs = {
        "ingest": "parse raw news/incident files into per-state datasets",
        "synth": "generate a synthetic corpus with an optional planted signal",
        "baseline": "model x window grid of repeated-CV scores",
        "sweep-windows": "AUROC versus fixed moving-average length",
        "temporal-locality": "event probability versus days since last event",
        "train-corr": "fold AUROC versus training positives",
        "ablate": "drop each feature group in turn",
        "characteristics": "rank tests of probability across incident "
                           "categories",
        "pred-windows": "prediction-window sweep (propagation/aggregation)",
        "transfer": "cross-state training supplements",
        "group-test": "pool similar low-event states",
        "coarse-demo": "nationwide naive-scoring arithmetic demo",
    }
    for name, help_text in specs.items():
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        if name == "ingest":
            sub.add_argument("--news", action="append", default=[],
                             metavar="PATH", help="news file (repeatable)")
            sub.add_argument("--format", choices=("gkg", "events"),
                             default="gkg", dest="news_format",
                             help="news file layout")
            sub.add_argument("--incidents", default=None,
                             help="incident table CSV")
        elif name == "characteristics":
            sub.add_argument("--incidents", default=None,
                             help="incident table CSV")
        elif name == "coarse-demo":
            sub.add_argument("--basis", choices=("days", "incidents"),
                             default="days",
                             help="how to read the per-state counts "
                                  "(annotation only)")
    return parser


def _resolve(args) -> experiments.ExperimentConfig:
    config = (RunConfig.from_file(args.config) if args.config
              else RunConfig.empty())
    seed = args.seed if args.seed is not None else config.get_int("seed", 0)
    profile = args.profile or config.get("profile", "desk")
    workers = (args.workers if args.workers is not None
               else config.get_int("workers", 1))
    out_dir = args.out or f"runs/{args.command}"
    data_dir = args.data or config.get("data.dir")
    return experiments.ExperimentConfig.resolve(
        config, out_dir, data_dir=data_dir, profile=profile, seed=seed,
        workers=workers)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outputs = experiments.CommandOutputs(cfg, args.command)
    try:
        with experiments.timed(outputs, "command"):
            if args.command == "ingest":
                if not args.news and not args.incidents:
                    raise ValueError("ingest needs --news and/or --incidents")
                experiments.cmd_ingest(cfg, args.news, args.news_format,
                                       args.incidents)
            elif args.command == "synth":
                experiments.cmd_synth(cfg)
            elif args.command == "baseline":
                experiments.cmd_baseline(cfg)
            elif args.command == "sweep-windows":
                experiments.cmd_window_sweep(cfg)
            elif args.command == "temporal-locality":
                experiments.cmd_temporal_locality(cfg)
            elif args.command == "train-corr":
                experiments.cmd_train_event_correlation(cfg)
            elif args.command == "ablate":
                experiments.cmd_feature_ablation(cfg)
            elif args.command == "characteristics":
                experiments.cmd_attack_characteristics(cfg, args.incidents)
            elif args.command == "pred-windows":
                experiments.cmd_prediction_windows(cfg)
            elif args.command == "transfer":
                experiments.cmd_transfer(cfg)
            elif args.command == "group-test":
                experiments.cmd_group_testing(cfg)
            elif args.command == "coarse-demo":
                experiments.cmd_coarse_eval_demo(cfg, args.basis)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        outputs.log(f"error: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
