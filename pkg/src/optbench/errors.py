"""Exception types shared across the package."""

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite (pivot {pivot})")
        self.pivot = pivot


class NumericError(ArithmeticError):
    """A loss or gradient became non-finite."""


class ContractError(RuntimeError):
    """An object was used in a way its protocol forbids."""


class FormatError(ValueError):
    """A data file does not match its binary layout."""


class TruncatedFileError(FormatError):
    pass


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class ReportError(RuntimeError):
    pass
