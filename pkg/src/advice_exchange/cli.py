"""Command line entry point."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, default_config, load_config
from .harness import run_experiment


def _config_from_args(args):
    preset = "desk" if args.desk else args.preset
    cfg = load_config(args.config, preset) if args.config else default_config(preset)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "advice", None) is not None:
        overrides["advice"] = args.advice == "on"
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    return cfg.with_overrides(**overrides) if overrides else cfg


def _summary(cfg, trace) -> str:
    best = trace.final_best()
    return " ".join(f"{cfg.agents[i]}={best[i]:.4f}" for i in sorted(best))


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    out = cfg.output_dir
    trace = run_experiment(cfg, out_dir=out)
    print(f"advice={'on' if cfg.advice else 'off'} seed={cfg.seed} final best: {_summary(cfg, trace)}")
    print(f"wrote {out / 'trace.csv'} and {out / 'advice_events.jsonl'}")
    return 0


def cmd_paired(args) -> int:
    cfg = _config_from_args(args)
    root = cfg.output_dir
    for advice, sub in ((True, "advice"), (False, "standalone")):
        run_cfg = cfg.with_overrides(advice=advice, output_dir=str(root / sub))
        trace = run_experiment(run_cfg, out_dir=run_cfg.output_dir)
        print(f"{sub:>10}: {_summary(run_cfg, trace)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advice-exchange",
                                     description="Traffic-light learners with and without peer advice.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file (missing keys take defaults)")
        p.add_argument("--preset", choices=("full", "desk"), default=None)
        p.add_argument("--desk", action="store_true", help="shorthand for --preset desk")
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--out", type=Path, help="output directory")

    run = sub.add_parser("run", help="run one experiment")
    common(run)
    run.add_argument("--advice", choices=("on", "off"))
    run.set_defaults(func=cmd_run)

    paired = sub.add_parser("paired", help="run the same seed with and without advice")
    common(paired)
    paired.set_defaults(func=cmd_paired)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
