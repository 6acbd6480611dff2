"""Input validation helpers used by estimators and pipeline functions."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def as_float_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise ParameterError(f"{name} must be 2-D, got shape {A.shape}")
    if A.size == 0:
        raise ParameterError(f"{name} is empty")
    if not np.isfinite(A).all():
        raise ParameterError(f"{name} contains non-finite values")
    return A


def as_float_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-D float64 array with finite entries."""
    v = np.asarray(x, dtype=np.float64).ravel()
    if v.size == 0:
        raise ParameterError(f"{name} is empty")
    if not np.isfinite(v).all():
        raise ParameterError(f"{name} contains non-finite values")
    return v


def check_square_symmetric(S, name: str = "S", tol: float = 1e-8) -> np.ndarray:
    """Validate a symmetric square matrix and return a symmetrized float64 copy."""
    A = as_float_matrix(S, name)
    n, m = A.shape
    if n != m:
        raise ParameterError(f"{name} must be square, got {A.shape}")
    if not np.allclose(A, A.T, atol=tol, rtol=0.0):
        raise ParameterError(f"{name} must be symmetric")
    return (A + A.T) / 2.0


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    """Validate an integer-valued parameter with a lower bound."""
    iv = int(value)
    if iv != value or iv < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return iv


def check_in_range(value, name: str, lo: float, hi: float,
                   inclusive_hi: bool = True) -> float:
    """Validate a scalar parameter against [lo, hi] or [lo, hi)."""
    fv = float(value)
    ok = lo <= fv <= hi if inclusive_hi else lo <= fv < hi
    if not ok:
        bracket = "]" if inclusive_hi else ")"
        raise ParameterError(f"{name} must lie in [{lo}, {hi}{bracket}, got {value!r}")
    return fv
