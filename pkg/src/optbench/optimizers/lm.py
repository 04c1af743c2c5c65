"""Levenberg-Marquardt for least-squares training.

The step solves ``(J^T J + lam I) delta = J^T r`` where ``r = d - y`` are the
stacked residuals and ``J = dy/dw``.  When there are fewer residuals than
parameters the equivalent ``delta = J^T (J J^T + lam I)^{-1} r`` is solved
instead, which needs an m x m system rather than a p x p one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .. import nn
from ..errors import NotPositiveDefiniteError
from ..linalg import cholesky_solve
from .common import Batch, StepReport

LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12
CHUNK_SAMPLES = 256


@dataclass(frozen=True)
class GaussNewtonSystem:
    """Normal equations at one parameter point.

    ``loss`` is the mean over samples of the summed squared residuals.
    In dual form ``gram`` is J J^T, ``rhs`` is r and ``jac`` is kept for the
    back-projection; in primal form ``gram`` is J^T J and ``rhs`` is J^T r.
    """

    loss: float
    gram: np.ndarray
    rhs: np.ndarray
    dual: bool = False
    jac: np.ndarray | None = None

    @classmethod
    def from_residuals(cls, residuals: np.ndarray, jac: np.ndarray, n_samples: int = 1) -> "GaussNewtonSystem":
        r = np.asarray(residuals, dtype=np.float64).reshape(-1)
        jac = np.asarray(jac, dtype=np.float64)
        loss = float(r @ r) / n_samples
        if jac.shape[0] < jac.shape[1]:
            return cls(loss, jac @ jac.T, r, dual=True, jac=jac)
        return cls(loss, jac.T @ jac, jac.T @ r)

    def solve(self, lam: float) -> np.ndarray:
        a = self.gram.copy()
        a[np.diag_indices_from(a)] += lam
        x = cholesky_solve(a, self.rhs)
        return self.jac.T @ x if self.dual else x


@dataclass(frozen=True)
class LmState:
    lam: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    last_loss: float | None = None
    # normal equations at the current point, reused while steps are rejected
    cache: tuple | None = None


def _clamp(lam: float) -> tuple[float, bool]:
    if lam <= LAMBDA_MIN:
        return LAMBDA_MIN, True
    if lam >= LAMBDA_MAX:
        return LAMBDA_MAX, True
    return lam, False


def lm_update(
    state: LmState,
    params: np.ndarray,
    system_fn: Callable[[np.ndarray], GaussNewtonSystem],
    loss_fn: Callable[[np.ndarray], float],
    cache_key: tuple = (),
) -> tuple[np.ndarray, LmState, StepReport]:
    """One damped Gauss-Newton trial with the accept/reject damping rule.

    ``cache_key`` identifies the data the system was built from; together with
    the parameters it decides whether the cached system is still valid.
    """
    cached = state.cache
    if (
        cached is not None
        and len(cached[0]) == len(cache_key)
        and all(a is b for a, b in zip(cached[0], cache_key))
        and np.array_equal(cached[1], params)
    ):
        system = cached[2]
    else:
        system = system_fn(params)
    old_loss = system.loss

    trial_loss = None
    evaluations = 0
    try:
        delta = system.solve(state.lam)
    except NotPositiveDefiniteError:
        delta = None
    # a zero step (stationary point) cannot decrease the loss, so it counts as a rejection
    if delta is not None and np.all(np.isfinite(delta)) and np.any(delta):
        candidate = params + delta
        trial_loss = loss_fn(candidate)
        evaluations = 1
        accepted = bool(np.isfinite(trial_loss) and trial_loss < old_loss)
        new_params = candidate if accepted else params
    else:
        accepted, new_params = False, params

    if accepted:
        lam, saturated = _clamp(state.lam / state.lambda_down)
        new_loss = trial_loss
        cache = None
    else:
        lam, saturated = _clamp(state.lam * state.lambda_up)
        new_loss = old_loss
        cache = (tuple(cache_key), np.array(params, copy=True), system)

    new_state = replace(state, lam=lam, last_loss=new_loss, cache=cache)
    report = StepReport(
        loss_before=old_loss,
        loss_after=new_loss,
        accepted=accepted,
        lam=lam,
        trial_loss=trial_loss,
        evaluations=evaluations,
        saturated=saturated,
    )
    return new_params, new_state, report


def network_system(model: nn.NetworkState, batch: Batch, workers: int = 1) -> GaussNewtonSystem:
    """Normal equations for a network fitted to regression targets.

    Jacobian rows are produced in fixed-size sample chunks; partial products
    are summed in chunk order, so the result does not depend on ``workers``.
    """
    inputs, targets = batch.inputs, np.asarray(batch.targets, dtype=np.float64)
    n = inputs.shape[0]
    n_out = int(np.prod(model.output_shape))
    p = model.n_params
    dual = n * n_out < p
    bounds = [(lo, min(lo + CHUNK_SAMPLES, n)) for lo in range(0, n, CHUNK_SAMPLES)]

    def work(bound):
        lo, hi = bound
        jac, out = nn.batch_jacobian(model, inputs[lo:hi])
        r = (targets[lo:hi] - out).reshape(-1)
        if dual:
            return jac, r
        return jac.T @ jac, jac.T @ r, float(r @ r)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 and len(bounds) > 1 else None
    try:
        parts = pool.map(work, bounds) if pool else map(work, bounds)
        if dual:
            parts = list(parts)
            jac = np.concatenate([part[0] for part in parts])
            r = np.concatenate([part[1] for part in parts])
            return GaussNewtonSystem(float(r @ r) / n, jac @ jac.T, r, dual=True, jac=jac)
        gram = np.zeros((p, p))
        rhs = np.zeros(p)
        sq = 0.0
        for part_gram, part_rhs, part_sq in parts:
            gram += part_gram
            rhs += part_rhs
            sq += part_sq
    finally:
        if pool:
            pool.shutdown()
    return GaussNewtonSystem(sq / n, gram, rhs)


def network_loss(model: nn.NetworkState, batch: Batch) -> float:
    out, _ = nn.forward(model, batch.inputs)
    r = np.asarray(batch.targets, dtype=np.float64) - out
    return float(np.sum(r * r)) / batch.inputs.shape[0]


def lm_step(state: LmState, model: nn.NetworkState, batch: Batch, workers: int = 1) -> tuple[nn.NetworkState, LmState, StepReport]:
    params, new_state, report = lm_update(
        state,
        model.params,
        lambda w: network_system(model.with_params(w), batch, workers),
        lambda w: network_loss(model.with_params(w), batch),
        cache_key=(batch.inputs, batch.targets),
    )
    new_model = model if params is model.params else model.with_params(params)
    return new_model, new_state, report
