"""Portfolio weighting: equal weights and the max-Sharpe tangency point.

The tangency problem max (w'mu - rf) / sqrt(w'Sigma w) over the simplex
with w in [0,1] is solved through its convex reformulation

    minimize y'Sigma y   subject to  (mu - rf)'y = 1,  y >= 0,

with w = y / sum(y), using projected gradient descent with a backtracking
line search (the feasible set admits an exact projection by bisection).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import (
    ConvergenceError,
    InfeasibleTangencyError,
    InsufficientHistoryError,
    NumericalError,
    ParameterError,
)
from .market_data import ReturnsPanel

TRADING_DAYS_PER_YEAR = 252
KKT_TOL = 1e-6
MAX_ITER = 10_000


@dataclass(frozen=True)
class WeightVector:
    """Non-negative weights summing to one, aligned with ``tickers``."""

    tickers: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.shape != (len(self.tickers),):
            raise ParameterError("weights must align with tickers")
        if (w < 0).any() or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ParameterError("weights must be non-negative and sum to 1")

    def as_dict(self) -> dict[str, float]:
        return {t: float(w) for t, w in zip(self.tickers, self.weights)}


@dataclass(frozen=True)
class MomentEstimate:
    """Annualized mean vector and covariance from a daily-returns window."""

    tickers: tuple[str, ...]
    mu: np.ndarray
    sigma: np.ndarray
    window: tuple[date, date]

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        n = len(self.tickers)
        if mu.shape != (n,) or sigma.shape != (n, n):
            raise ParameterError("moment shapes must match the ticker list")
        if not np.allclose(sigma, sigma.T, atol=1e-10, rtol=0.0):
            raise ParameterError("sigma must be symmetric")
        if (np.diag(sigma) < -1e-12).any():
            raise ParameterError("sigma diagonal must be non-negative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", (sigma + sigma.T) / 2.0)


def estimate_moments(rp: ReturnsPanel, tickers) -> MomentEstimate:
    """Annualized moments (factor 252) from the panel's full window."""
    tickers = tuple(tickers)
    if not tickers:
        raise ParameterError("tickers must be non-empty")
    if rp.n_days < 30:
        raise InsufficientHistoryError(
            f"moment estimation needs >= 30 trading days, have {rp.n_days}"
        )
    sub = rp.restrict(tickers)
    mu = TRADING_DAYS_PER_YEAR * sub.returns.mean(axis=1)
    if len(tickers) == 1:
        var = sub.returns.var(ddof=1)
        sigma = TRADING_DAYS_PER_YEAR * np.array([[var]])
    else:
        sigma = TRADING_DAYS_PER_YEAR * np.cov(sub.returns, ddof=1)
    return MomentEstimate(tickers, mu, sigma, (rp.dates[0], rp.dates[-1]))


def equal_weights(tickers) -> WeightVector:
    """1/n in every name."""
    tickers = tuple(tickers)
    if not tickers:
        raise ParameterError("tickers must be non-empty")
    return WeightVector(tickers, np.full(len(tickers), 1.0 / len(tickers)))


def _project_to_constraint(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {y >= 0, a'y = 1} by bisection on the multiplier.

    g(nu) = a' max(0, x - nu*a) is continuous and non-increasing, strictly
    decreasing wherever it is positive, so g(nu) = 1 has a unique root.
    """
    def g(nu: float) -> float:
        return float(a @ np.maximum(x - nu * a, 0.0))

    lo, hi = -1.0, 1.0
    while g(lo) < 1.0:
        lo *= 2.0
        if lo < -1e18:
            raise NumericalError("projection bracket failed")
    while g(hi) > 1.0:
        hi *= 2.0
        if hi > 1e18:
            raise NumericalError("projection bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(x - lo * a, 0.0)


def _kkt_residual(y: np.ndarray, sigma: np.ndarray, a: np.ndarray) -> float:
    grad = 2.0 * sigma @ y
    nu = float(y @ grad)  # from stationarity contracted with y (a'y = 1, s'y = 0)
    slack = grad - nu * a
    return max(
        abs(float(a @ y) - 1.0),
        max(0.0, -float(y.min())),
        max(0.0, -float(slack.min())),
        float(np.abs(slack * y).max()),
    )


def max_sharpe(m: MomentEstimate, rf: float = 0.0) -> WeightVector:
    """Long-only tangency weights maximizing (w'mu - rf)/sqrt(w'Sigma w).

    Sigma gets a small diagonal ridge (1e-8 * trace/n) when nearly
    singular. Solved on a scale-normalized problem to KKT residual
    <= 1e-6; budget 10000 projected-gradient iterations.

    Raises
    ------
    InfeasibleTangencyError
        If no asset's expected return exceeds ``rf``.
    NumericalError
        If Sigma stays singular after regularization.
    ConvergenceError
        If the KKT tolerance is not reached within the budget.
    """
    excess = m.mu - float(rf)
    if not (excess > 0).any():
        raise InfeasibleTangencyError(
            f"no asset return exceeds the risk-free rate {rf}"
        )
    sigma = m.sigma.copy()
    n = sigma.shape[0]
    eigs = np.linalg.eigvalsh(sigma)
    if eigs.min() < 1e-10:
        sigma = sigma + (1e-8 * np.trace(sigma) / n) * np.eye(n)
        eigs = np.linalg.eigvalsh(sigma)
        if eigs.min() <= 0:
            raise NumericalError("covariance is singular even after regularization")

    # Normalize scales: the tangency direction is invariant under positive
    # scaling of Sigma and of (mu - rf), and conditioning improves.
    s_scale = float(np.mean(np.diag(sigma)))
    a_scale = float(np.abs(excess).max())
    sig = sigma / s_scale
    a = excess / a_scale

    y = _project_to_constraint(np.full(n, 1.0), a)
    lipschitz = 2.0 * float(np.linalg.eigvalsh(sig).max())
    step0 = 4.0 / lipschitz

    def f(v: np.ndarray) -> float:
        return float(v @ sig @ v)

    residual = _kkt_residual(y, sig, a)
    for _ in range(MAX_ITER):
        if residual <= KKT_TOL:
            break
        grad = 2.0 * sig @ y
        step = step0
        fy = f(y)
        while True:
            y_new = _project_to_constraint(y - step * grad, a)
            diff = y_new - y
            if f(y_new) <= fy + float(grad @ diff) + float(diff @ diff) / (2.0 * step):
                break
            step /= 2.0
            if step < 1e-18:
                y_new = y
                break
        y = y_new
        residual = _kkt_residual(y, sig, a)
    if residual > KKT_TOL:
        raise ConvergenceError(
            f"max-Sharpe solver stalled at KKT residual {residual:.2e}",
            last=y, n_iter=MAX_ITER,
        )
    w = y / float(y.sum())
    w = np.maximum(w, 0.0)
    w /= w.sum()
    return WeightVector(m.tickers, w)
