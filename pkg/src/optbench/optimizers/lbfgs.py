"""Limited-memory BFGS: secant history, two-loop recursion, Armijo backtracking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ..linalg import dot, norm2

CURVATURE_TOL = 1e-10
ARMIJO_C = 1e-4


@dataclass(frozen=True)
class LbfgsState:
    memory: int = 10
    pairs: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    t: int = 0

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")


def bfgs_update(state: LbfgsState, s: np.ndarray, y: np.ndarray) -> LbfgsState:
    """Store the pair (s, y) if it carries positive curvature; otherwise skip it."""
    if s.shape != y.shape:
        raise ValueError(f"s {s.shape} and y {y.shape} differ")
    sy = dot(s, y)
    if not sy > CURVATURE_TOL * norm2(s) * norm2(y):
        return state
    pairs = (state.pairs + ((s.copy(), y.copy()),))[-state.memory:]
    return LbfgsState(state.memory, pairs, state.t + 1)


def lbfgs_direction(state: LbfgsState, grad: np.ndarray) -> np.ndarray:
    """-H @ grad with H the limited-memory inverse-Hessian approximation."""
    q = np.array(grad, dtype=np.float64, copy=True)
    if not state.pairs:
        return -q
    rhos = [1.0 / dot(s, y) for s, y in state.pairs]
    alphas = []
    for (s, y), rho in zip(reversed(state.pairs), reversed(rhos)):
        a = rho * dot(s, q)
        q -= a * y
        alphas.append(a)
    s_last, y_last = state.pairs[-1]
    r = q * (dot(s_last, y_last) / dot(y_last, y_last))
    for (s, y), rho, a in zip(state.pairs, rhos, reversed(alphas)):
        b = rho * dot(y, r)
        r += (a - b) * s
    return -r


class LineSearchResult(NamedTuple):
    alpha: float
    accepted: bool
    loss: float | None
    evaluations: int


def line_search(
    evaluate: Callable[[np.ndarray], float],
    params: np.ndarray,
    direction: np.ndarray,
    grad: np.ndarray,
    lr0: float,
    max_iter: int,
    loss0: float | None = None,
) -> LineSearchResult:
    """Backtracking (halving) search for an Armijo step, at most ``max_iter`` trials.

    ``evaluations`` counts trial points only; ``loss0`` is evaluated first
    (and not counted) when not supplied.
    """
    slope = dot(grad, direction)
    if not slope < 0:
        raise ValueError("direction is not a descent direction")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if loss0 is None:
        loss0 = evaluate(params)
    alpha = lr0
    for k in range(1, max_iter + 1):
        trial = evaluate(params + alpha * direction)
        if np.isfinite(trial) and trial <= loss0 + ARMIJO_C * alpha * slope:
            return LineSearchResult(alpha, True, float(trial), k)
        if k < max_iter:
            alpha *= 0.5
    return LineSearchResult(alpha, False, None, max_iter)
