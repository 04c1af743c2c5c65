"""Cross-run comparison: mean time per iteration and final loss per optimizer."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ReportError
from .runner import read_metrics
from .svg import bar_chart, line_chart

REPORT_COLUMNS = ("task", "optimizer", "runs", "iterations", "mean_wall_time_ms", "final_loss")


@dataclass(frozen=True)
class ReportRow:
    task: str
    optimizer: str
    runs: int
    iterations: int
    mean_wall_time_ms: float
    final_loss: float


def _load_run(run_dir: Path):
    metrics, meta = run_dir / "metrics.csv", run_dir / "run.json"
    if not metrics.is_file():
        raise ReportError(f"run {run_dir}: metrics.csv not found")
    if not meta.is_file():
        raise ReportError(f"run {run_dir}: run.json not found")
    cfg = json.loads(meta.read_text())["config"]
    label = f"cg-{cfg['beta_rule']}" if cfg["optimizer"] == "cg" else cfg["optimizer"]
    rows, _ = read_metrics(metrics)
    return cfg["task"], label, rows


def emit_report(run_dirs, out_dir: str | Path) -> list[ReportRow]:
    """Aggregate runs by (task, optimizer) and write report.csv, report_time.svg, report_loss.svg.

    Iteration times are pooled over all runs of a group before averaging;
    the final loss is the mean over runs of each run's last recorded loss.
    """
    run_dirs = [Path(d) for d in run_dirs]
    if not run_dirs:
        raise ReportError("no runs given")
    groups: dict[tuple[str, str], dict] = {}
    curves: dict[str, tuple[list[float], list[float]]] = {}
    for run_dir in run_dirs:
        task, label, rows = _load_run(run_dir)
        g = groups.setdefault((task, label), {"runs": 0, "times": [], "finals": [], "iters": 0})
        g["runs"] += 1
        g["iters"] += len(rows)
        g["times"].extend(r["wall_time_ms"] for r in rows if r["wall_time_ms"] is not None)
        losses = [r for r in rows if r["loss_after"] is not None]
        if losses:
            g["finals"].append(losses[-1]["loss_after"])
        name = f"{task}/{label} ({run_dir.name})"
        curves[name] = ([r["iter"] for r in losses], [r["loss_after"] for r in losses])

    table = []
    for (task, label) in sorted(groups):
        g = groups[(task, label)]
        table.append(ReportRow(
            task, label, g["runs"], g["iters"],
            float(np.mean(g["times"])) if g["times"] else float("nan"),
            float(np.mean(g["finals"])) if g["finals"] else float("nan"),
        ))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in table:
            writer.writerow([row.task, row.optimizer, row.runs, row.iterations, repr(row.mean_wall_time_ms), repr(row.final_loss)])
    (out / "report_time.svg").write_text(
        bar_chart({f"{r.task}/{r.optimizer}": r.mean_wall_time_ms for r in table}, "Mean wall time per iteration", "ms")
    )
    (out / "report_loss.svg").write_text(line_chart(dict(sorted(curves.items())), "Training loss", "iteration", "loss"))
    return table


def read_report(path: str | Path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        return [
            ReportRow(r["task"], r["optimizer"], int(r["runs"]), int(r["iterations"]),
                      float(r["mean_wall_time_ms"]), float(r["final_loss"]))
            for r in csv.DictReader(fh)
        ]
