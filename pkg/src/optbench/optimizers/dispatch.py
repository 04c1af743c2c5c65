"""Uniform ``optimizer_step`` over the four methods."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .. import nn
from ..linalg import dot
from ..losses import LossKind, loss_and_grad, one_hot
from .common import Batch, StepReport, require_finite
from .first_order import BetaRule, CgState, cg_step, sgd_step
from .lbfgs import LbfgsState, bfgs_update, lbfgs_direction, line_search
from .lm import LmState, lm_step


@dataclass(frozen=True)
class Sgd:
    name: str = field(default="sgd", init=False)


@dataclass(frozen=True)
class ConjGrad:
    beta_rule: BetaRule = BetaRule.POLAK_RIBIERE
    name: str = field(default="cg", init=False)


@dataclass(frozen=True)
class Lbfgs:
    memory: int = 10
    max_line_search: int = 10
    name: str = field(default="lbfgs", init=False)

    def __post_init__(self):
        if self.memory < 1 or self.max_line_search < 1:
            raise ValueError("memory and max_line_search must be >= 1")


@dataclass(frozen=True)
class LevenbergMarquardt:
    lambda0: float = 1e-3
    name: str = field(default="lm", init=False)


OptimizerKind = Union[Sgd, ConjGrad, Lbfgs, LevenbergMarquardt]


def init_state(kind: OptimizerKind, n_params: int):
    if isinstance(kind, Sgd):
        return None
    if isinstance(kind, ConjGrad):
        return CgState(restart_every=n_params)
    if isinstance(kind, Lbfgs):
        return LbfgsState(memory=kind.memory)
    if isinstance(kind, LevenbergMarquardt):
        return LmState(lam=kind.lambda0)
    raise TypeError(f"unknown optimizer kind {kind!r}")


def batch_loss(model: nn.NetworkState, batch: Batch, loss_kind: LossKind) -> float:
    out, _ = nn.forward(model, batch.inputs)
    return loss_and_grad(loss_kind, out, batch.targets)[0]


def batch_loss_grad(model: nn.NetworkState, batch: Batch, loss_kind: LossKind) -> tuple[float, np.ndarray]:
    """Batch-mean loss and its gradient w.r.t. the flat parameters."""
    out, trace = nn.forward(model, batch.inputs)
    loss, dout = loss_and_grad(loss_kind, out, batch.targets)
    return loss, nn.backward(model, trace, dout)


def regression_batch(batch: Batch, loss_kind: LossKind, n_outputs: int) -> Batch:
    """Express a labelled batch as one-hot regression targets (used by LM)."""
    if loss_kind is LossKind.MSE:
        return batch
    return Batch(batch.inputs, one_hot(batch.targets, n_outputs))


def optimizer_step(
    kind: OptimizerKind,
    state,
    model: nn.NetworkState,
    batch: Batch,
    loss_kind: LossKind,
    lr: float,
    workers: int = 1,
) -> tuple[nn.NetworkState, object, StepReport]:
    """Advance ``model`` by one step of ``kind``.

    SGD and CG leave ``loss_after`` unset so callers can evaluate it outside
    any timed region. LM ignores ``lr``; its damping plays that role.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")

    if isinstance(kind, LevenbergMarquardt):
        reg = regression_batch(batch, loss_kind, int(np.prod(model.output_shape)))
        return lm_step(state, model, reg, workers)

    loss, grad = batch_loss_grad(model, batch, loss_kind)
    require_finite("loss", loss)
    require_finite("gradient", grad)

    if isinstance(kind, Sgd):
        return model.with_params(sgd_step(model.params, grad, lr)), state, StepReport(loss)

    if isinstance(kind, ConjGrad):
        params, state = cg_step(state, model.params, grad, lr, kind.beta_rule)
        return model.with_params(params), state, StepReport(loss)

    if isinstance(kind, Lbfgs):
        direction = lbfgs_direction(state, grad)
        if not np.any(grad):
            return model, state, StepReport(loss, loss, True, alpha=0.0, evaluations=0)
        if not dot(direction, grad) < 0:
            # history became inconsistent; fall back to steepest descent
            state = LbfgsState(memory=state.memory, t=state.t)
            direction = -grad
        search = line_search(
            lambda w: batch_loss(model.with_params(w), batch, loss_kind),
            model.params, direction, grad, lr, kind.max_line_search, loss0=loss,
        )
        if not search.accepted:
            return model, state, StepReport(loss, loss, False, alpha=search.alpha, evaluations=search.evaluations)
        new_model = model.with_params(model.params + search.alpha * direction)
        _, new_grad = batch_loss_grad(new_model, batch, loss_kind)
        state = bfgs_update(state, new_model.params - model.params, new_grad - grad)
        return new_model, state, StepReport(loss, search.loss, True, alpha=search.alpha, evaluations=search.evaluations)

    raise TypeError(f"unknown optimizer kind {kind!r}")
