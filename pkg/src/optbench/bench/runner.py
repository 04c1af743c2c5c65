"""Run one configured experiment and record per-iteration metrics."""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..data import load_cifar10_batches, load_mnist_idx, subset, batches
from ..errors import ConfigError, NumericError
from ..losses import LossKind, one_hot
from ..nn import init_params, save_checkpoint
from ..optimizers import Batch, LevenbergMarquardt, batch_loss, init_state, optimizer_step
from ..rl import CartPoleEnv, DqnConfig, FlappyEnv, ReplayBuffer, dqn_train_episode, linear_epsilon
from .architectures import ARCHITECTURES
from .config import ExperimentConfig
from .svg import line_chart

log = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ("iter", "loss_before", "loss_after", "wall_time_ms", "lambda", "alpha", "accepted", "episode_return", "mean_q")
FAIL_MARKER = "FAIL"


@dataclass(frozen=True)
class MetricsRecord:
    iter: int
    loss_before: float | None
    loss_after: float | None
    wall_time_ms: float | None
    lam: float | None = None
    alpha: float | None = None
    accepted: float | None = None  # 1/0 per step; accepted fraction for RL episodes
    episode_return: float | None = None
    mean_q: float | None = None

    def csv_row(self) -> list[str]:
        def cell(v):
            if v is None:
                return ""
            if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
                return str(int(v))
            return repr(float(v))
        return [
            cell(self.iter), cell(self.loss_before), cell(self.loss_after), cell(self.wall_time_ms),
            cell(self.lam), cell(self.alpha), cell(self.accepted), cell(self.episode_return), cell(self.mean_q),
        ]


def fingerprint() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "optbench": __version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
        "cpu_count": os.cpu_count(),
    }


def default_out_dir(cfg: ExperimentConfig) -> Path:
    return Path("runs") / f"{cfg.task}-{cfg.label}-seed{cfg.seed}"


def _resolve_paths(cfg: ExperimentConfig) -> ExperimentConfig:
    def absolute(p):
        return str(Path(p).expanduser().resolve()) if p is not None else None

    return replace(
        cfg,
        mnist_images=absolute(cfg.mnist_images),
        mnist_labels=absolute(cfg.mnist_labels),
        cifar_files=tuple(absolute(p) for p in cfg.cifar_files),
    )


def load_task_data(cfg: ExperimentConfig):
    paths = [cfg.mnist_images, cfg.mnist_labels] if cfg.task == "mnist" else list(cfg.cifar_files)
    missing = [p for p in paths if not Path(p).is_file()]
    if missing:
        raise ConfigError(f"data file not found: {missing[0]}")
    if cfg.task == "mnist":
        ds = load_mnist_idx(cfg.mnist_images, cfg.mnist_labels)
    else:
        ds = load_cifar10_batches(cfg.cifar_files)
    return subset(ds, cfg.subset_n, cfg.seed)


def _timed_step(kind, state, model, batch, loss_kind, lr, workers):
    start = time.perf_counter_ns()
    model, state, report = optimizer_step(kind, state, model, batch, loss_kind, lr, workers)
    elapsed = (time.perf_counter_ns() - start) / 1e6
    after = report.loss_after if report.loss_after is not None else batch_loss(model, batch, loss_kind)
    return model, state, report, after, elapsed


def _classification(cfg: ExperimentConfig, model):
    ds = load_task_data(cfg)
    kind = cfg.optimizer_kind()
    state = init_state(kind, model.n_params)
    it = 0

    if isinstance(kind, LevenbergMarquardt):
        # LM consumes the whole subset per step, as one-hot regression targets
        full = Batch(ds.images, one_hot(ds.labels, 10))
        for _ in range(cfg.iterations or cfg.epochs):
            model, state, report, after, ms = _timed_step(kind, state, model, full, LossKind.MSE, cfg.lr, cfg.workers)
            yield model, MetricsRecord(it, report.loss_before, after, ms, lam=report.lam, accepted=float(report.accepted))
            it += 1
        return

    total = cfg.iterations if cfg.iterations is not None else cfg.epochs * len(batches(len(ds), cfg.bs, cfg.seed, 0))
    epoch = 0
    while it < total:
        for idx in batches(len(ds), cfg.bs, cfg.seed, epoch):
            if it >= total:
                break
            batch = Batch(ds.images[idx], ds.labels[idx])
            model, state, report, after, ms = _timed_step(kind, state, model, batch, LossKind.CROSS_ENTROPY, cfg.lr, cfg.workers)
            yield model, MetricsRecord(it, report.loss_before, after, ms, alpha=report.alpha, accepted=float(report.accepted))
            it += 1
        epoch += 1


def _mean(xs):
    return float(np.mean(xs)) if xs else None


def _reinforcement(cfg: ExperimentConfig, model):
    env = CartPoleEnv() if cfg.task == "cartpole" else FlappyEnv()
    kind = cfg.optimizer_kind()
    state = init_state(kind, model.n_params)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    buffer = ReplayBuffer(cfg.replay_capacity, seed=seeds[0])
    rng = np.random.default_rng(seeds[1])
    for ep in range(cfg.episodes):
        dcfg = DqnConfig(cfg.gamma, linear_epsilon(ep, cfg.episodes), cfg.bs, cfg.lr, cfg.warmup, cfg.workers)
        env_seed = cfg.seed * 1_000_003 + ep
        model, state, m = dqn_train_episode(env, model, kind, state, buffer, dcfg, rng, env_seed)
        record = MetricsRecord(
            ep,
            _mean(m.losses_before),
            _mean(m.losses_after),
            _mean(m.step_times_ms),
            lam=m.lambdas[-1] if m.lambdas else None,
            alpha=m.alphas[-1] if m.alphas else None,
            accepted=_mean([float(a) for a in m.accepted]),
            episode_return=m.episode_return,
            mean_q=_mean(m.q_values),
        )
        if m.failed:
            raise _Failure(model, record, m.failure)
        yield model, record


class _Failure(Exception):
    def __init__(self, model, record, reason):
        super().__init__(reason)
        self.model, self.record, self.reason = model, record, reason


def _finite(rec: MetricsRecord) -> bool:
    return all(v is None or np.isfinite(v) for v in (rec.loss_before, rec.loss_after))


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> list[MetricsRecord]:
    """Train as configured, writing metrics.csv, run.json, curves.svg and model.json.

    Raises NumericError (after flushing the CSV with a failure marker row)
    when a loss turns non-finite.
    """
    cfg = _resolve_paths(cfg)
    out = Path(out_dir or cfg.out or default_out_dir(cfg))
    out.mkdir(parents=True, exist_ok=True)
    model = init_params(ARCHITECTURES[cfg.task](), cfg.seed)
    meta = {
        "config": cfg.to_dict(),
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "csv_columns": list(CSV_COLUMNS),
        "n_params": model.n_params,
        "environment": fingerprint(),
        "status": "running",
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n")

    records: list[MetricsRecord] = []
    failure = None
    steps = _reinforcement(cfg, model) if cfg.is_rl else _classification(cfg, model)
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        fh.flush()
        try:
            for model, rec in steps:
                writer.writerow(rec.csv_row())
                fh.flush()
                records.append(rec)
                if not _finite(rec):
                    failure = f"non-finite loss at iteration {rec.iter}"
                    break
        except _Failure as exc:
            model = exc.model
            writer.writerow(exc.record.csv_row())
            records.append(exc.record)
            failure = exc.reason
        except NumericError as exc:
            failure = str(exc)
        if failure is not None:
            row = [""] * len(CSV_COLUMNS)
            row[0] = str(len(records))
            row[CSV_COLUMNS.index("accepted")] = FAIL_MARKER
            writer.writerow(row)
            log.error("run aborted: %s", failure)

    xs = [r.iter for r in records if r.loss_after is not None]
    ys = [r.loss_after for r in records if r.loss_after is not None]
    (out / "curves.svg").write_text(
        line_chart({cfg.label: (xs, ys)}, f"{cfg.task}: training loss", "episode" if cfg.is_rl else "iteration", "loss")
    )
    save_checkpoint(out / "model.json", model)
    meta["status"] = "failed" if failure else "completed"
    if failure:
        meta["failure"] = failure
    meta["records"] = len(records)
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n")
    if failure:
        raise NumericError(failure)
    return records


def read_metrics(path: str | Path) -> tuple[list[dict], bool]:
    """Rows of a metrics.csv as dicts of floats/None, and whether a failure marker is present."""
    rows, failed = [], False
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for raw in reader:
            if raw["accepted"] == FAIL_MARKER:
                failed = True
                continue
            rows.append({k: (float(v) if v != "" else None) for k, v in raw.items()})
    return rows, failed
