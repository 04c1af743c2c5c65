from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError


@dataclass(frozen=True)
class Batch:
    """Inputs with either class labels (cross-entropy) or regression targets."""

    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class StepReport:
    loss_before: float
    loss_after: float | None = None
    accepted: bool = True
    lam: float | None = None
    alpha: float | None = None
    trial_loss: float | None = None
    evaluations: int = 1
    saturated: bool = False


def require_finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite {name}")
