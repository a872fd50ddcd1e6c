"""pesinlab <task> --config FILE [--seed N] [--workers N] [--out DIR]"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import TASKS, ConfigError, parse_config
from .runner import emit_plot_data, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="pesinlab", description="Numerical checks of Pesin's entropy formula on torus maps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} task")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, help="worker count hint (env PESINLAB_WORKERS)")
        p.add_argument("--out", help="output directory")
    p = sub.add_parser("export", help="flatten reports in a run directory to plot-ready CSV")
    p.add_argument("run_dir")
    p.add_argument("--out", help="where to write plot_*.csv (default: run_dir)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "export":
        try:
            emit_plot_data(args.run_dir, args.out or args.run_dir)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if isinstance(doc, dict):
        doc.setdefault("task", args.command)
        if doc["task"] != args.command:
            print(f"error: config task {doc['task']!r} does not match subcommand {args.command!r}", file=sys.stderr)
            return 2
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.out is not None:
            doc["out"] = args.out
        workers = args.workers if args.workers is not None else os.environ.get("PESINLAB_WORKERS")
        if workers is not None:
            try:
                doc["workers"] = int(workers)
            except ValueError:
                print("error: PESINLAB_WORKERS must be an integer", file=sys.stderr)
                return 2
    try:
        config = parse_config(doc)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2

    manifest = run_experiment(config)
    for w in manifest.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for e in manifest.errors:
        print(f"error: {e}", file=sys.stderr)
    print(os.path.join(config.out, "manifest.json"))
    return 0 if manifest.ok else 1


if __name__ == "__main__":
    sys.exit(main())
