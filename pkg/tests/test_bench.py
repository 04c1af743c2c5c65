import json

import numpy as np
import pytest

from conftest import ROOT
from optbench.bench.config import TASK_DEFAULTS, ExperimentConfig, parse_config
from optbench.bench.report import emit_report, read_report
from optbench.bench.runner import CSV_COLUMNS, FAIL_MARKER, read_metrics, run_experiment
from optbench.bench.svg import bar_chart, line_chart
from optbench.cli import main
from optbench.data import encode_idx_images, encode_idx_labels
from optbench.errors import ConfigError, NumericError, ReportError


@pytest.fixture
def mnist_files(tmp_path):
    rng = np.random.default_rng(0)
    labels = np.arange(600) % 10
    px = rng.integers(0, 60, size=(600, 28, 28), dtype=np.uint8)
    # a bright class-dependent bar so the task is learnable
    for i, k in enumerate(labels):
        px[i, 2 * k + 3:2 * k + 6, 4:24] = 255
    img, lbl = tmp_path / "img", tmp_path / "lbl"
    img.write_bytes(encode_idx_images(px))
    lbl.write_bytes(encode_idx_labels(labels))
    return img, lbl


def mnist_config(files, **extra):
    lines = [f"task = mnist", f"mnist_images = {files[0]}", f"mnist_labels = {files[1]}"]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    return parse_config("\n".join(lines))


# --- config ----------------------------------------------------------------------


def test_task_defaults_for_mnist_lm():
    cfg = parse_config("task = mnist\noptimizer = lm\nmnist_images = a\nmnist_labels = b")
    assert cfg.lr == 0.001 and cfg.seed == 42 and cfg.subset_n is None


@pytest.mark.parametrize("task", ["cifar", "mnist", "flappy", "cartpole"])
def test_task_default_values(task):
    paths = {"cifar": "cifar_files = x.bin", "mnist": "mnist_images = a\nmnist_labels = b"}.get(task, "")
    for opt, (lr, bs, mi) in TASK_DEFAULTS[task].items():
        cfg = parse_config(f"task = {task}\noptimizer = {opt}\n{paths}")
        assert (cfg.lr, cfg.bs) == (lr, bs)
        if mi is not None:
            assert cfg.mi == mi


def test_default_settings_by_task():
    assert TASK_DEFAULTS["cifar"]["lbfgs"] == (1e-6, 1000, 10)
    assert TASK_DEFAULTS["mnist"]["sgd"][:2] == (1e-3, 64)
    assert TASK_DEFAULTS["flappy"]["lbfgs"] == (1e-6, 32, 20)


def test_override_and_comments():
    text = "task = cartpole  # comment\n# full line\n\noptimizer = sgd\nbs = 64\n"
    assert parse_config(text).bs == 64
    cfg = parse_config(text, ["bs=16", "lr = 0.01"])
    assert cfg.bs == 16 and cfg.lr == 0.01


@pytest.mark.parametrize(
    "text, line",
    [
        ("task = cartpole\noptimizer =", 2),
        ("task = cartpole\noptimizer = sgd\nfoo = 1", 3),
        ("task = cartpole\noptimizer = sgd\nbs = -4", 3),
        ("task = cartpole\noptimizer = sgd\nlr = abc", 3),
        ("task = cartpole\ntask = mnist\noptimizer = sgd", 2),
        ("task = cartpole\noptimizer = adam", 2),
        ("task cartpole", 1),
    ],
)
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_missing_required():
    with pytest.raises(ConfigError, match="optimizer"):
        parse_config("task = cartpole")
    with pytest.raises(ConfigError, match="mnist_images"):
        parse_config("task = mnist\noptimizer = sgd")
    with pytest.raises(ConfigError, match="cifar_files"):
        parse_config("task = cifar\noptimizer = sgd")


def test_config_dict_round_trip():
    cfg = parse_config("task = cifar\noptimizer = cg\nbeta_rule = dy\ncifar_files = a.bin, b.bin")
    assert cfg.cifar_files == ("a.bin", "b.bin")
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    assert cfg.label == "cg-dy"


# --- runner ------------------------------------------------------------------------


def test_sgd_epoch_record_count(mnist_files, tmp_path):
    cfg = mnist_config(mnist_files, optimizer="sgd", subset_n=512, epochs=1)
    records = run_experiment(cfg, tmp_path / "run")
    assert len(records) == 8
    assert [r.iter for r in records] == list(range(8))
    assert all(r.wall_time_ms >= 0 for r in records)
    rows, failed = read_metrics(tmp_path / "run" / "metrics.csv")
    assert not failed and len(rows) == 8
    header = (tmp_path / "run" / "metrics.csv").read_text().splitlines()[0]
    assert header == "iter,loss_before,loss_after,wall_time_ms,lambda,alpha,accepted,episode_return,mean_q"
    assert tuple(header.split(",")) == CSV_COLUMNS
    for name in ("run.json", "curves.svg", "model.json"):
        assert (tmp_path / "run" / name).is_file()
    meta = json.loads((tmp_path / "run" / "run.json").read_text())
    assert meta["status"] == "completed" and meta["csv_schema_version"] == 1
    assert {"python", "numpy", "platform"} <= set(meta["environment"])


def loss_columns(path):
    rows, _ = read_metrics(path)
    return [(r["loss_before"], r["loss_after"], r["lambda"], r["alpha"], r["accepted"]) for r in rows]


@pytest.mark.parametrize("opt", ["sgd", "cg", "lbfgs", "lm"])
def test_runs_are_deterministic(opt, mnist_files, tmp_path):
    cfg = mnist_config(mnist_files, optimizer=opt, subset_n=96, iterations=4, workers=2 if opt == "lm" else 1)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    a, b = loss_columns(tmp_path / "a" / "metrics.csv"), loss_columns(tmp_path / "b" / "metrics.csv")
    assert a == b and len(a) == 4


def test_run_json_replays_identically(mnist_files, tmp_path):
    cfg = mnist_config(mnist_files, optimizer="cg", subset_n=128, iterations=3)
    run_experiment(cfg, tmp_path / "a")
    assert main(["run", str(tmp_path / "a" / "run.json"), "--out", str(tmp_path / "b")]) == 0
    assert loss_columns(tmp_path / "a" / "metrics.csv") == loss_columns(tmp_path / "b" / "metrics.csv")


def test_lm_accepted_losses_strictly_decrease(mnist_files, tmp_path):
    cfg = mnist_config(mnist_files, optimizer="lm", subset_n=40, iterations=12)
    records = run_experiment(cfg, tmp_path / "lm")
    accepted = [r.loss_after for r in records if r.accepted == 1.0]
    assert len(accepted) >= 2
    assert all(b < a for a, b in zip(accepted, accepted[1:]))
    assert all(r.lam is not None and r.alpha is None for r in records)


def test_rl_run_rows(tmp_path):
    cfg = parse_config("task = cartpole\noptimizer = sgd\nepisodes = 3\nlr = 0.001\nbs = 8")
    records = run_experiment(cfg, tmp_path / "rl")
    assert len(records) == 3
    assert all(r.episode_return is not None and r.episode_return > 0 for r in records)
    assert records[-1].mean_q is not None


def test_non_finite_loss_writes_failure_marker(mnist_files, tmp_path):
    cfg = mnist_config(mnist_files, optimizer="sgd", subset_n=64, bs=16, iterations=20, lr=1e200)
    with np.errstate(all="ignore"), pytest.raises(NumericError):
        run_experiment(cfg, tmp_path / "bad")
    rows, failed = read_metrics(tmp_path / "bad" / "metrics.csv")
    assert failed
    assert FAIL_MARKER in (tmp_path / "bad" / "metrics.csv").read_text().splitlines()[-1]
    assert json.loads((tmp_path / "bad" / "run.json").read_text())["status"] == "failed"


def test_missing_data_file_is_config_error(tmp_path):
    cfg = parse_config(f"task = mnist\noptimizer = sgd\nmnist_images = {tmp_path}/nope\nmnist_labels = {tmp_path}/nope2")
    with pytest.raises(ConfigError):
        run_experiment(cfg, tmp_path / "x")


# --- report ------------------------------------------------------------------------


def test_report_single_and_pooled(mnist_files, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_experiment(mnist_config(mnist_files, optimizer="sgd", subset_n=64, iterations=3), a)
    run_experiment(mnist_config(mnist_files, optimizer="sgd", subset_n=64, iterations=5, seed=1), b)
    rows = emit_report([a], tmp_path / "r1")
    assert len(rows) == 1 and rows[0].runs == 1

    rows = emit_report([a, b], tmp_path / "r2")
    assert len(rows) == 1 and rows[0].runs == 2 and rows[0].iterations == 8
    times = [r["wall_time_ms"] for d in (a, b) for r in read_metrics(d / "metrics.csv")[0]]
    assert rows[0].mean_wall_time_ms == pytest.approx(np.mean(times), rel=1e-12)
    finals = [read_metrics(d / "metrics.csv")[0][-1]["loss_after"] for d in (a, b)]
    assert rows[0].final_loss == pytest.approx(np.mean(finals), rel=1e-12)
    assert read_report(tmp_path / "r2" / "report.csv") == rows

    emit_report([a, b], tmp_path / "r3")
    for name in ("report.csv", "report_time.svg", "report_loss.svg"):
        assert (tmp_path / "r2" / name).read_bytes() == (tmp_path / "r3" / name).read_bytes()


def test_report_missing_metrics(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(ReportError, match="empty"):
        emit_report([tmp_path / "empty"], tmp_path / "out")


def test_svg_output_is_deterministic():
    series = {"a": ([0, 1, 2], [3.0, 2.0, 1.5]), "b": ([0, 1], [float("nan"), 1.0])}
    assert line_chart(series, "t", "x", "y") == line_chart(series, "t", "x", "y")
    svg = bar_chart({"lm": 12.5, "sgd": 0.3, "bad": float("nan")}, "t", "ms")
    assert svg.startswith("<svg") and "nan" not in svg.split("</text>")[-1]


# --- CLI ---------------------------------------------------------------------------


def test_cli_exit_codes(mnist_files, tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text(f"task = mnist\noptimizer = sgd\nsubset_n = 64\niterations = 2\nmnist_images = {mnist_files[0]}\nmnist_labels = {mnist_files[1]}\n")
    assert main(["run", str(good), "--out", str(tmp_path / "g")]) == 0

    bad = tmp_path / "bad.cfg"
    bad.write_text("task = mnist\nwhat = 1\n")
    assert main(["run", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err

    assert main(["run", str(tmp_path / "missing.cfg")]) == 1

    with np.errstate(all="ignore"):
        code = main(["run", str(good), "--override", "lr=1e200", "--override", "iterations=20", "--out", str(tmp_path / "n")])
    assert code == 2

    assert main(["report", str(tmp_path / "g"), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report.csv").is_file()
    assert main(["report", str(tmp_path / "nothing")]) == 2


@pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.cfg")), ids=lambda p: p.name)
def test_example_configs_parse(path):
    cfg = parse_config(path.read_text())
    assert cfg.task in ("mnist", "cartpole")
