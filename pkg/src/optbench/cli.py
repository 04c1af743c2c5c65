"""Command line: ``optbench run <config>`` and ``optbench report <run-dir>...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench.config import ExperimentConfig, parse_config
from .bench.report import emit_report
from .bench.runner import run_experiment
from .errors import ConfigError, NumericError, ReportError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _load_config(path: str, overrides: list[str]) -> ExperimentConfig:
    text = Path(path).read_text()
    if path.endswith(".json"):
        # a run.json from an earlier run: replay its resolved config
        cfg = json.loads(text)["config"]
        lines = [f"{k} = {','.join(v) if isinstance(v, list) else v}" for k, v in cfg.items() if v not in (None, [], ())]
        return parse_config("\n".join(lines), overrides)
    return parse_config(text, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("config", help="config file (key = value lines) or a previous run.json")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--out", help="output directory")

    rep = sub.add_parser("report", help="compare finished runs")
    rep.add_argument("runs", nargs="+", help="run directories")
    rep.add_argument("--out", default="report", help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            cfg = _load_config(args.config, args.override)
            records = run_experiment(cfg, args.out)
        except (ConfigError, FileNotFoundError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except NumericError as exc:
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        last = records[-1] if records else None
        print(f"{len(records)} records; final loss {last.loss_after if last else 'n/a'}")
        return EXIT_OK

    try:
        rows = emit_report(args.runs, args.out)
    except ReportError as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for r in rows:
        print(f"{r.task:10s} {r.optimizer:8s} runs={r.runs} iters={r.iterations} "
              f"mean_ms={r.mean_wall_time_ms:.3f} final_loss={r.final_loss:.6g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
