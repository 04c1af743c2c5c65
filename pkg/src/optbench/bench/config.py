"""``key = value`` experiment configuration with per-task optimizer defaults."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError
from ..optimizers import BetaRule, ConjGrad, LevenbergMarquardt, Lbfgs, OptimizerKind, Sgd

TASKS = ("cifar", "mnist", "flappy", "cartpole")
OPTIMIZERS = ("sgd", "cg", "lbfgs", "lm")

# (lr, batch size, line-search cap) per task and optimizer; LM has no batch
# size of its own (classification feeds it the whole subset, RL the task's bs).
TASK_DEFAULTS = {
    "cifar": {"lbfgs": (1e-6, 1000, 10), "sgd": (1e-3, 1000, None), "cg": (1e-3, 1000, None), "lm": (1e-3, 1000, None)},
    "mnist": {"lbfgs": (1e-6, 64, 10), "sgd": (1e-3, 64, None), "cg": (1e-3, 64, None), "lm": (1e-3, 64, None)},
    "flappy": {"lbfgs": (1e-6, 32, 20), "sgd": (1e-6, 32, None), "cg": (1e-6, 32, None), "lm": (1e-6, 32, None)},
    "cartpole": {"lbfgs": (1e-6, 32, 10), "sgd": (1e-6, 32, None), "cg": (1e-6, 32, None), "lm": (1e-6, 32, None)},
}


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    optimizer: str
    lr: float
    bs: int
    mi: int = 10
    memory: int = 10
    beta_rule: str = "pr"
    lambda0: float = 1e-3
    epochs: int = 1
    iterations: int | None = None
    episodes: int = 100
    subset_n: int | None = None
    seed: int = 42
    gamma: float = 0.99
    replay_capacity: int = 10000
    warmup: int = 0
    workers: int = 1
    mnist_images: str | None = None
    mnist_labels: str | None = None
    cifar_files: tuple[str, ...] = ()
    out: str | None = None

    @property
    def is_rl(self) -> bool:
        return self.task in ("flappy", "cartpole")

    @property
    def label(self) -> str:
        return f"cg-{self.beta_rule}" if self.optimizer == "cg" else self.optimizer

    def optimizer_kind(self) -> OptimizerKind:
        if self.optimizer == "sgd":
            return Sgd()
        if self.optimizer == "cg":
            return ConjGrad(BetaRule(self.beta_rule))
        if self.optimizer == "lbfgs":
            return Lbfgs(self.memory, self.mi)
        return LevenbergMarquardt(self.lambda0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cifar_files"] = list(self.cifar_files)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["cifar_files"] = tuple(d.get("cifar_files", ()))
        cfg = cls(**d)
        _validate(cfg)
        return cfg


def _positive_int(v: str) -> int:
    n = int(v)
    if n < 1:
        raise ValueError("must be >= 1")
    return n


def _nonneg_int(v: str) -> int:
    n = int(v)
    if n < 0:
        raise ValueError("must be >= 0")
    return n


def _positive_float(v: str) -> float:
    x = float(v)
    if not x > 0 or x == float("inf"):
        raise ValueError("must be a positive finite number")
    return x


def _unit_float(v: str) -> float:
    x = float(v)
    if not 0.0 <= x <= 1.0:
        raise ValueError("must lie in [0, 1]")
    return x


def _choice(options):
    def parse(v: str) -> str:
        v = v.lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


PARSERS = {
    "task": _choice(TASKS),
    "optimizer": _choice(OPTIMIZERS),
    "lr": _positive_float,
    "bs": _positive_int,
    "mi": _positive_int,
    "memory": _positive_int,
    "beta_rule": _choice(tuple(r.value for r in BetaRule)),
    "lambda0": _positive_float,
    "epochs": _positive_int,
    "iterations": _positive_int,
    "episodes": _positive_int,
    "subset_n": _positive_int,
    "seed": _nonneg_int,
    "gamma": _unit_float,
    "replay_capacity": _positive_int,
    "warmup": _nonneg_int,
    "workers": _positive_int,
    "mnist_images": str,
    "mnist_labels": str,
    "cifar_files": lambda v: tuple(p.strip() for p in v.split(",") if p.strip()),
    "out": str,
}
assert set(PARSERS) == {f.name for f in fields(ExperimentConfig)}


def _split_line(raw: str, line_no: int | None) -> tuple[str, str] | None:
    text = raw.split("#", 1)[0].strip()
    if not text:
        return None
    if "=" not in text:
        raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line_no)
    key, value = (part.strip() for part in text.split("=", 1))
    if key not in PARSERS:
        raise ConfigError(f"unknown key {key!r}", line_no)
    if not value:
        raise ConfigError(f"empty value for {key!r}", line_no)
    return key, value


def parse_config(text: str, overrides: list[str] | tuple[str, ...] = ()) -> ExperimentConfig:
    """Parse a config file body; ``overrides`` are extra ``key=value`` items that win."""
    values: dict[str, object] = {}

    def take(raw: str, line_no: int | None, allow_repeat: bool):
        item = _split_line(raw, line_no)
        if item is None:
            return
        key, value = item
        if key in values and not allow_repeat:
            raise ConfigError(f"duplicate key {key!r}", line_no)
        try:
            values[key] = PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line_no) from None

    for no, raw in enumerate(text.splitlines(), start=1):
        take(raw, no, allow_repeat=False)
    for item in overrides:
        take(item, None, allow_repeat=True)

    for key in ("task", "optimizer"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    lr, bs, mi = TASK_DEFAULTS[values["task"]][values["optimizer"]]
    values.setdefault("lr", lr)
    values.setdefault("bs", bs)
    if mi is not None:
        values.setdefault("mi", mi)
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.task not in TASKS or cfg.optimizer not in OPTIMIZERS:
        raise ConfigError(f"unsupported task/optimizer {cfg.task}/{cfg.optimizer}")
    if cfg.task == "mnist":
        for key in ("mnist_images", "mnist_labels"):
            if getattr(cfg, key) is None:
                raise ConfigError(f"task mnist requires {key!r}")
    if cfg.task == "cifar" and not cfg.cifar_files:
        raise ConfigError("task cifar requires 'cifar_files'")


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)
