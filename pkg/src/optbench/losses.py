"""Mean squared error and softmax cross-entropy, each returning (loss, dloss/dpred).

Both reduce over the batch by taking the mean; MSE sums over the output
coordinates of a sample before averaging.  A rank-1 prediction is a single
sample.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import ShapeError


class LossKind(enum.Enum):
    MSE = "mse"
    CROSS_ENTROPY = "cross_entropy"


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    n = pred.shape[0] if pred.ndim > 1 else 1
    resid = target - pred
    loss = float(np.sum(resid * resid)) / n
    return loss, (-2.0 / n) * resid


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    z = logits[None] if single else logits
    if z.ndim != 2:
        raise ShapeError(f"logits must be rank 1 or 2, got {logits.shape}")
    labels = np.atleast_1d(np.asarray(labels)).astype(np.int64)
    n, k = z.shape
    if labels.shape != (n,):
        raise ShapeError(f"{labels.shape[0]} labels for {n} samples")
    if np.any(labels < 0) or np.any(labels >= k):
        raise IndexError(f"label out of range for {k} classes")

    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.sum(log_norm - shifted[rows, labels])) / n
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, (grad[0] if single else grad)


def loss_and_grad(kind: LossKind, pred: np.ndarray, target) -> tuple[float, np.ndarray]:
    if kind is LossKind.MSE:
        return mse_loss(pred, target)
    return cross_entropy_loss(pred, target)


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (n_classes,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out
