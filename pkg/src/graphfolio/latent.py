"""PCA over stock return vectors and reconstruction-difference selection.

Each stock's daily-return vector is one observation (rows = stocks), so a
fitted model describes the cross-section of return histories. Stocks whose
histories the model reconstructs worst/best feed the Max/Min difference
portfolios.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ParameterError
from .market_data import ReturnsPanel
from .validation import as_float_matrix, check_positive_int


@dataclass(frozen=True)
class ReconstructionReport:
    """Per-stock reconstruction error and latent coordinates.

    ``errors[i]`` is the L2 norm of (actual - reconstructed) for stock i;
    ``latent_coords[i]`` is its coordinate in the model's reduced space.
    """

    tickers: tuple[str, ...]
    errors: np.ndarray
    latent_coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        errors = np.asarray(self.errors, dtype=np.float64)
        coords = np.asarray(self.latent_coords, dtype=np.float64)
        if errors.shape != (len(self.tickers),):
            raise ParameterError("errors must have one entry per ticker")
        if not np.isfinite(errors).all() or (errors < 0).any():
            raise ParameterError("errors must be finite and non-negative")
        if coords.shape[0] != len(self.tickers):
            raise ParameterError("latent_coords must have one row per ticker")
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "latent_coords", coords)


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


class ReturnsPCA(TransformerMixin, BaseEstimator):
    """Principal components of the stock-by-day returns matrix.

    Computed by SVD of the row-centered matrix; components carry a
    deterministic sign convention (largest-magnitude entry positive).

    Parameters
    ----------
    n_components : int, default 3
        Number of retained components.

    Attributes
    ----------
    mean_ : ndarray, shape (n_days,)
        Column-wise mean over stocks.
    components_ : ndarray, shape (n_components, n_days)
        Orthonormal rows, ordered by decreasing singular value.
    singular_values_ : ndarray, shape (n_components,)
    explained_variance_ratio_ : ndarray, shape (n_components,)
    """

    def __init__(self, n_components: int = 3):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        k = check_positive_int(self.n_components, "n_components")
        if k > min(X.shape):
            raise ParameterError(
                f"n_components={k} exceeds min(n_stocks, n_days)={min(X.shape)}"
            )
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        self.components_ = _fix_signs(vt[:k])
        self.singular_values_ = s[:k].copy()
        total = float((s**2).sum())
        self.explained_variance_ratio_ = (
            s[:k] ** 2 / total if total > 0 else np.zeros(k)
        )
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        """Projection scores of each row onto the components."""
        X = self._check_shapes(X)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, scores) -> np.ndarray:
        scores = as_float_matrix(scores, "scores")
        if scores.shape[1] != self.components_.shape[0]:
            raise ParameterError(
                f"scores have {scores.shape[1]} columns, model has "
                f"{self.components_.shape[0]} components"
            )
        return self.mean_ + scores @ self.components_

    def reconstruction_report(self, panel: ReturnsPanel) -> ReconstructionReport:
        """Per-stock L2 error between actual and PCA-reconstructed returns."""
        scores = self.transform(panel.returns)
        recon = self.inverse_transform(scores)
        errors = np.linalg.norm(panel.returns - recon, axis=1)
        return ReconstructionReport(panel.tickers, errors, scores)

    def _check_shapes(self, X) -> np.ndarray:
        if not hasattr(self, "components_"):
            raise ParameterError("model is not fitted")
        X = as_float_matrix(X, "X")
        if X.shape[1] != self.mean_.shape[0]:
            raise ParameterError(
                f"X has {X.shape[1]} days, model was fitted on {self.mean_.shape[0]}"
            )
        return X


def select_extreme(report: ReconstructionReport, direction: str, n: int) -> list[str]:
    """Tickers with the largest ("max") or smallest ("min") reconstruction error.

    Ties break lexicographically by ticker; result is in rank order.
    """
    n = check_positive_int(n, "n")
    if n > len(report.tickers):
        raise ParameterError(f"n={n} exceeds universe size {len(report.tickers)}")
    if direction not in ("max", "min"):
        raise ParameterError(f"direction must be 'max' or 'min', got {direction!r}")
    sign = -1.0 if direction == "max" else 1.0
    ranked = sorted(zip(report.tickers, report.errors), key=lambda te: (sign * te[1], te[0]))
    return [t for t, _ in ranked[:n]]


def aggregate_selections(runs: list[list[str]], n: int) -> list[str]:
    """Most frequently selected tickers across repeated stochastic runs.

    Ties break lexicographically; result is in descending-count order.
    """
    if not runs:
        raise ParameterError("runs must be non-empty")
    n = check_positive_int(n, "n")
    counts: Counter[str] = Counter()
    for run in runs:
        counts.update(run)
    if len(counts) < n:
        raise ParameterError(
            f"only {len(counts)} distinct tickers across runs, need {n}"
        )
    ranked = sorted(counts.items(), key=lambda tc: (-tc[1], tc[0]))
    return [t for t, _ in ranked[:n]]
