"""Plain gradient descent and nonlinear conjugate gradient."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..linalg import dot
from .common import require_finite

DEGENERATE_DENOMINATOR = 1e-30


def sgd_step(params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if params.shape != grad.shape:
        raise ValueError(f"params {params.shape} and grad {grad.shape} differ")
    require_finite("gradient", grad)
    return params - lr * grad


class BetaRule(enum.Enum):
    FLETCHER_REEVES = "fr"
    POLAK_RIBIERE = "pr"
    HESTENES_STIEFEL = "hs"
    DAI_YUAN = "dy"


def compute_beta(rule: BetaRule, grad: np.ndarray, prev_grad: np.ndarray, prev_dir: np.ndarray) -> float:
    """Conjugacy coefficient; 0.0 signals a restart (negative or ill-defined beta)."""
    diff = grad - prev_grad
    if rule is BetaRule.FLETCHER_REEVES:
        num, den = dot(grad, grad), dot(prev_grad, prev_grad)
    elif rule is BetaRule.POLAK_RIBIERE:
        num, den = dot(grad, diff), dot(prev_grad, prev_grad)
    elif rule is BetaRule.HESTENES_STIEFEL:
        num, den = dot(grad, diff), dot(prev_dir, diff)
    elif rule is BetaRule.DAI_YUAN:
        num, den = dot(grad, grad), dot(prev_dir, diff)
    else:
        raise ValueError(f"unknown beta rule {rule!r}")
    if abs(den) < DEGENERATE_DENOMINATOR:
        return 0.0
    beta = num / den
    if not np.isfinite(beta):
        return 0.0
    return max(beta, 0.0)


@dataclass(frozen=True)
class CgState:
    prev_grad: np.ndarray | None = None
    prev_direction: np.ndarray | None = None
    since_restart: int = 0
    restart_every: int = 0  # 0 disables the periodic restart


def cg_direction(state: CgState, grad: np.ndarray, rule: BetaRule) -> tuple[np.ndarray, float, CgState]:
    require_finite("gradient", grad)
    periodic = state.restart_every and state.since_restart >= state.restart_every
    if state.prev_grad is None or periodic:
        beta = 0.0
    else:
        beta = compute_beta(rule, grad, state.prev_grad, state.prev_direction)
    if beta == 0.0:
        direction = -grad
        since = 1
    else:
        direction = -grad + beta * state.prev_direction
        since = state.since_restart + 1
    new_state = CgState(grad.copy(), direction, since, state.restart_every)
    return direction, beta, new_state


def cg_step(state: CgState, params: np.ndarray, grad: np.ndarray, lr: float, rule: BetaRule) -> tuple[np.ndarray, CgState]:
    """One fixed-length CG step: ``params + lr * direction``."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    direction, _, new_state = cg_direction(state, grad, rule)
    return params + lr * direction, new_state
