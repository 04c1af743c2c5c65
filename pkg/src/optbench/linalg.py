"""Dense float64 kernels used by the optimizers.

Tensors are plain row-major ``numpy.ndarray`` objects of dtype float64; the
functions here add the shape and definiteness checks the optimizers rely on.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import NotPositiveDefiniteError, ShapeError

SYMMETRY_TOL = 1e-12


def as_tensor(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def dot(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot needs equal-length vectors, got {a.shape} and {b.shape}")
    return float(a @ b)


def norm2(a: np.ndarray) -> float:
    return float(np.sqrt(dot(a, a)))


def check_symmetric(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    gap = np.abs(a - a.T)
    if np.any(gap > SYMMETRY_TOL * np.maximum(1.0, np.abs(a))):
        raise ValueError("matrix is not symmetric")


def cholesky_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a``.

    Raises NotPositiveDefiniteError (with the zero-based failing pivot) when
    the factorization breaks down.
    """
    a = as_tensor(a)
    b = as_tensor(b)
    check_symmetric(a)
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise ShapeError(f"right-hand side {b.shape} does not match matrix {a.shape}")
    if a.shape[0] == 0:
        return b.copy()
    factor, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf argument {-info} invalid")
    x, info = lapack.dpotrs(factor, b, lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return x
