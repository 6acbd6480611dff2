"""Sparse precision graphs (graphical LASSO) and 2-D spectral embeddings.

The graphical LASSO maximizes log det(T) - tr(S T) - alpha * ||T||_1 over
the off-diagonal entries only, via block coordinate descent with a cyclic
coordinate-wise lasso inner solver. The spectral embedding maps stocks to
a low-dimensional plane through the symmetric normalized Laplacian of a
zero-thresholded correlation affinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConvergenceError, DegenerateGraphError, NumericalError, ParameterError
from .market_data import ReturnsPanel
from .validation import as_float_matrix, check_positive_int, check_square_symmetric

Edge = tuple[int, int, float]


def sample_covariance(rp: ReturnsPanel) -> np.ndarray:
    """Unbiased covariance across days, per stock pair."""
    if rp.n_days < 2:
        raise ParameterError("need at least 2 days for a covariance estimate")
    return np.cov(rp.returns, ddof=1)


def default_penalty(S: np.ndarray) -> float:
    """Half the mean off-diagonal |S_ij| (0 for a 1x1 matrix)."""
    p = S.shape[0]
    if p < 2:
        return 0.0
    off = ~np.eye(p, dtype=bool)
    return 0.5 * float(np.abs(S[off]).mean())


def _lasso_cd(gram: np.ndarray, target: np.ndarray, alpha: float,
              beta: np.ndarray, tol: float, max_sweeps: int = 1000) -> np.ndarray:
    """Cyclic coordinate descent for (1/2) b'Gb - b't + alpha*||b||_1."""
    beta = beta.copy()
    for _ in range(max_sweeps):
        delta = 0.0
        for k in range(beta.size):
            old = beta[k]
            resid = target[k] - gram[k] @ beta + gram[k, k] * old
            beta[k] = np.sign(resid) * max(abs(resid) - alpha, 0.0) / gram[k, k]
            delta = max(delta, abs(beta[k] - old))
        if delta < tol:
            break
    return beta


def graphical_lasso(
    S,
    alpha: float,
    tol: float = 1e-5,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Solve the off-diagonal-penalized sparse precision problem.

    Parameters
    ----------
    S : array, shape (p, p)
        Sample covariance; symmetric with strictly positive diagonal.
    alpha : float
        Non-negative L1 penalty on off-diagonal precision entries. With
        ``alpha=0`` the result is the plain inverse (S must then be
        well-conditioned).
    tol : float
        Convergence threshold on the max off-diagonal change of the
        working covariance per full sweep.
    max_iter : int
        Sweep budget.

    Returns
    -------
    (theta, sigma_hat, n_iter)
        Precision estimate, its covariance dual (theta @ sigma_hat ~ I),
        and the sweep count.

    Raises
    ------
    ConvergenceError
        Budget exhausted; carries the last working covariance.
    NumericalError
        A working matrix lost positive definiteness.
    """
    S = check_square_symmetric(S, "S")
    if alpha < 0:
        raise ParameterError(f"penalty must be non-negative, got {alpha}")
    if (np.diag(S) <= 0).any():
        raise ParameterError("covariance diagonal must be strictly positive")

    p = S.shape[0]
    if p == 1:
        return np.array([[1.0 / S[0, 0]]]), S.copy(), 0

    W = S.copy()
    B = np.zeros((p, p))
    idx = np.arange(p)
    inner_tol = tol / 10.0
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        w_prev = W.copy()
        for j in range(p):
            rest = idx != j
            W11 = W[np.ix_(rest, rest)]
            beta = _lasso_cd(W11, S[rest, j], alpha, B[rest, j], inner_tol)
            B[rest, j] = beta
            w12 = W11 @ beta
            W[rest, j] = w12
            W[j, rest] = w12
        if np.max(np.abs(W - w_prev)) < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"graphical lasso did not converge in {max_iter} sweeps",
            last=W, n_iter=n_iter,
        )

    theta = np.zeros((p, p))
    for j in range(p):
        rest = idx != j
        beta = B[rest, j]
        gap = W[j, j] - W[rest, j] @ beta
        if gap <= 0:
            raise NumericalError("working covariance is not positive definite")
        theta[j, j] = 1.0 / gap
        theta[rest, j] = -beta / gap
    theta = (theta + theta.T) / 2.0
    if np.linalg.eigvalsh(theta).min() <= 0:
        raise NumericalError("estimated precision is not positive definite")
    return theta, W, n_iter


def partial_correlations(theta: np.ndarray) -> np.ndarray:
    """Partial-correlation matrix -theta_ij / sqrt(theta_ii * theta_jj)."""
    d = np.sqrt(np.diag(theta))
    pc = -theta / np.outer(d, d)
    np.fill_diagonal(pc, 1.0)
    return pc


@dataclass(frozen=True)
class PrecisionGraph:
    """Estimated sparse precision matrix with its weighted edge list.

    ``edges`` holds (i, j, partial_correlation) for i < j wherever
    |theta_ij| exceeds the construction threshold (signed weights; use
    :func:`edges_from_precision` for display magnitudes).
    """

    theta: np.ndarray
    sigma_hat: np.ndarray
    alpha: float
    edges: tuple[Edge, ...]
    tickers: tuple[str, ...] | None = None

    @classmethod
    def from_precision(cls, theta, sigma_hat, alpha, threshold: float = 1e-4,
                       tickers=None) -> "PrecisionGraph":
        theta = np.asarray(theta, dtype=np.float64)
        pc = partial_correlations(theta)
        p = theta.shape[0]
        edges = tuple(
            (i, j, float(pc[i, j]))
            for i in range(p)
            for j in range(i + 1, p)
            if abs(theta[i, j]) > threshold
        )
        return cls(theta, np.asarray(sigma_hat, dtype=np.float64), float(alpha),
                   edges, None if tickers is None else tuple(tickers))


def edges_from_precision(graph: PrecisionGraph, threshold: float = 1e-4) -> list[Edge]:
    """Undirected edges where |theta_ij| > threshold, weighted by |partial corr|."""
    pc = partial_correlations(graph.theta)
    p = graph.theta.shape[0]
    return [
        (i, j, float(abs(pc[i, j])))
        for i in range(p)
        for j in range(i + 1, p)
        if abs(graph.theta[i, j]) > threshold
    ]


def fit_precision_graph(
    rp: ReturnsPanel,
    alpha: float | None = None,
    tol: float = 1e-5,
    max_iter: int = 200,
    threshold: float = 1e-4,
) -> PrecisionGraph:
    """Graphical LASSO on a returns window (covariance across its days)."""
    S = sample_covariance(rp)
    resolved = default_penalty(S) if alpha is None else float(alpha)
    theta, sigma_hat, _ = graphical_lasso(S, resolved, tol=tol, max_iter=max_iter)
    return PrecisionGraph.from_precision(theta, sigma_hat, resolved, threshold,
                                         tickers=rp.tickers)


class GraphicalLasso(BaseEstimator):
    """Estimator wrapper around :func:`graphical_lasso`.

    Parameters
    ----------
    alpha : float or None
        Off-diagonal L1 penalty; None resolves to half the mean
        off-diagonal |S_ij| of the fitted covariance.
    tol, max_iter : solver controls.
    edge_threshold : float
        |theta_ij| cutoff used by :meth:`to_graph`.

    Attributes
    ----------
    empirical_covariance_ : sample covariance of the training data.
    covariance_ : penalized covariance estimate (dual of the precision).
    precision_ : sparse precision estimate.
    alpha_ : resolved penalty. n_iter_ : sweeps used.
    """

    def __init__(self, alpha: float | None = None, tol: float = 1e-5,
                 max_iter: int = 200, edge_threshold: float = 1e-4):
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter
        self.edge_threshold = edge_threshold

    def fit(self, X, y=None):
        """Fit from observations X of shape (n_samples, n_variables)."""
        X = as_float_matrix(X, "X")
        if X.shape[0] < 2:
            raise ParameterError("need at least 2 observations")
        S = np.cov(X, rowvar=False, ddof=1)
        S = np.atleast_2d(S)
        self.empirical_covariance_ = S
        self.alpha_ = default_penalty(S) if self.alpha is None else float(self.alpha)
        theta, sigma_hat, n_iter = graphical_lasso(
            S, self.alpha_, tol=self.tol, max_iter=check_positive_int(self.max_iter, "max_iter")
        )
        self.precision_ = theta
        self.covariance_ = sigma_hat
        self.n_iter_ = n_iter
        self.n_features_in_ = X.shape[1]
        return self

    def to_graph(self, tickers=None) -> PrecisionGraph:
        if not hasattr(self, "precision_"):
            raise ParameterError("estimator is not fitted")
        return PrecisionGraph.from_precision(
            self.precision_, self.covariance_, self.alpha_,
            self.edge_threshold, tickers=tickers,
        )


def _clipped_correlation(X: np.ndarray) -> np.ndarray:
    """Pearson correlation of rows, negatives clipped to 0, zero diagonal.

    Rows with zero variance correlate with nothing (all-zero affinity row).
    """
    centered = X - X.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = centered / safe[:, None]
    corr = unit @ unit.T
    corr[norms == 0, :] = 0.0
    corr[:, norms == 0] = 0.0
    A = np.clip(corr, 0.0, None)
    np.fill_diagonal(A, 0.0)
    return A


def _connected_components(A: np.ndarray) -> list[list[int]]:
    """Components of the positive-affinity graph, ordered by smallest member."""
    n = A.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.nonzero(A[u] > 0)[0]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def _fix_column_signs(U: np.ndarray) -> np.ndarray:
    U = U.copy()
    for j in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] *= -1.0
    return U


class SpectralEmbedding(BaseEstimator):
    """Laplacian-eigenmap coordinates for stocks from daily returns.

    Affinity is Pearson correlation between return rows, thresholded at
    zero; coordinates come from the eigenvectors of the symmetric
    normalized Laplacian just above its zero eigenspace, scaled by
    D^(-1/2). Disconnected graphs get a deterministic zero-eigenspace
    basis (component indicators), so the leading coordinate separates
    disconnected groups by sign. Isolated stocks sit at the origin.

    Parameters
    ----------
    n_components : int, default 2
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit_transform(self, X, y=None) -> np.ndarray:
        X = as_float_matrix(X, "X")
        dim = check_positive_int(self.n_components, "n_components")
        n = X.shape[0]
        if n < dim + 1:
            raise ParameterError(f"need at least {dim + 1} stocks, have {n}")

        A = _clipped_correlation(X)
        if not (A > 0).any():
            raise DegenerateGraphError("affinity matrix is identically zero")

        degrees = A.sum(axis=1)
        core = degrees > 0
        A_c = A[np.ix_(core, core)]
        d_c = degrees[core]
        m = int(core.sum())
        if m < dim + 1:
            raise DegenerateGraphError(
                f"only {m} connected stocks, need at least {dim + 1}"
            )

        inv_sqrt = 1.0 / np.sqrt(d_c)
        L = np.eye(m) - (inv_sqrt[:, None] * A_c) * inv_sqrt[None, :]
        evals, evecs = np.linalg.eigh(L)

        comps = _connected_components(A_c)
        if len(comps) > 1:
            evecs[:, : len(comps)] = self._zero_space_basis(d_c, comps)

        coords_core = evecs[:, 1 : dim + 1] * inv_sqrt[:, None]
        coords = np.zeros((n, dim))
        coords[core] = coords_core
        coords = _fix_column_signs(coords)

        self.embedding_ = coords
        self.affinity_matrix_ = A
        self.eigenvalues_ = evals
        self.n_features_in_ = X.shape[1]
        return coords

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    @staticmethod
    def _zero_space_basis(d: np.ndarray, comps: list[list[int]]) -> np.ndarray:
        """Orthonormal basis of the Laplacian's zero eigenspace.

        Starts from the global D^(1/2)*1 direction, then Gram-Schmidts the
        per-component indicator vectors, giving sign-separating contrast
        vectors in a deterministic order.
        """
        m = d.size
        sqrt_d = np.sqrt(d)
        basis = [sqrt_d / np.linalg.norm(sqrt_d)]
        for comp in comps:
            v = np.zeros(m)
            v[comp] = sqrt_d[comp]
            for b in basis:
                v -= (v @ b) * b
            norm = np.linalg.norm(v)
            if norm > 1e-12:
                basis.append(v / norm)
        if len(basis) != len(comps):
            raise NumericalError("zero-eigenspace basis construction failed")
        return np.column_stack(basis)


def embed_returns(rp: ReturnsPanel, n_components: int = 2) -> np.ndarray:
    """Spectral embedding of a returns panel (rows = stocks)."""
    return SpectralEmbedding(n_components=n_components).fit_transform(rp.returns)
