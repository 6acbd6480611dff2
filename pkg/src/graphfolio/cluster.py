"""Clustering engines (KMeans, Ward, affinity propagation) and the
quarterly dynamic-clustering schedule.

All engines cluster stocks as points in an embedding space (the 2-D
spectral embedding, or PCA score space for the KMeans benchmark) and are
deterministic given their inputs and seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from datetime import date

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .errors import (
    ConvergenceError,
    GraphfolioWarning,
    InsufficientHistoryError,
    ParameterError,
)
from .graph import SpectralEmbedding, fit_precision_graph
from .latent import ReturnsPCA
from .market_data import ReturnsPanel, TradingCalendar, slice_window
from .validation import as_float_matrix, check_in_range, check_positive_int


@dataclass(frozen=True)
class ClusterModel:
    """One period's stock-to-cluster assignment in an embedding space.

    ``centers[c]`` is cluster c's centroid (or its exemplar's coordinates
    for affinity propagation, where ``exemplars`` holds the stock indices).
    """

    tickers: tuple[str, ...]
    assignment: np.ndarray
    centers: np.ndarray
    space: np.ndarray
    method: str
    exemplars: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        labels = np.asarray(self.assignment, dtype=np.int64)
        centers = np.asarray(self.centers, dtype=np.float64)
        space = np.asarray(self.space, dtype=np.float64)
        object.__setattr__(self, "assignment", labels)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "space", space)
        n = len(self.tickers)
        if labels.shape != (n,) or space.shape[0] != n:
            raise ParameterError("assignment/space must have one entry per ticker")
        k = centers.shape[0]
        present = np.unique(labels)
        if not np.array_equal(present, np.arange(k)):
            raise ParameterError("cluster ids must be contiguous from 0, all non-empty")
        if self.exemplars is not None:
            object.__setattr__(self, "exemplars", tuple(int(e) for e in self.exemplars))
            for cid, e in enumerate(self.exemplars):
                if labels[e] != cid:
                    raise ParameterError("exemplar must belong to its own cluster")

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    def members(self, cluster_id: int) -> np.ndarray:
        return np.nonzero(self.assignment == cluster_id)[0]


# ---------------------------------------------------------------------------
# KMeans (Lloyd iterations, k-means++ seeding)
# ---------------------------------------------------------------------------

class KMeans(ClusterMixin, BaseEstimator):
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters are repaired by reassigning the point farthest from its
    current center. Deterministic per ``random_state``.
    """

    def __init__(self, n_clusters: int = 10, random_state: int = 0, max_iter: int = 300):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        k = check_positive_int(self.n_clusters, "n_clusters")
        n = X.shape[0]
        if k > n:
            raise ParameterError(f"n_clusters={k} exceeds n_points={n}")
        rng = np.random.default_rng(self.random_state)
        centers = self._plus_plus_init(X, k, rng)

        labels = None
        inertia_path = []
        for n_iter in range(1, check_positive_int(self.max_iter, "max_iter") + 1):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = d2.argmin(axis=1)
            new_labels = self._repair_empty(d2, new_labels, k)
            inertia_path.append(float(d2[np.arange(X.shape[0]), new_labels].sum()))
            if labels is not None and np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for c in range(k):
                centers[c] = X[labels == c].mean(axis=0)

        d2 = ((X - centers[labels]) ** 2).sum(axis=1)
        self.labels_ = labels
        self.cluster_centers_ = centers
        self.inertia_ = float(d2.sum())
        self.inertia_path_ = inertia_path
        self.n_iter_ = n_iter
        return self

    @staticmethod
    def _plus_plus_init(X, k, rng):
        n = X.shape[0]
        chosen = [int(rng.integers(n))]
        d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
        while len(chosen) < k:
            total = d2.sum()
            if total > 0:
                probs = d2 / total
                nxt = int(rng.choice(n, p=probs))
            else:
                remaining = np.setdiff1d(np.arange(n), chosen)
                nxt = int(rng.choice(remaining))
            chosen.append(nxt)
            d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
        return X[chosen].astype(np.float64).copy()

    @staticmethod
    def _repair_empty(d2, labels, k):
        labels = labels.copy()
        counts = np.bincount(labels, minlength=k)
        moved: set[int] = set()
        for c in np.nonzero(counts == 0)[0]:
            own = d2[np.arange(labels.size), labels]
            order = np.argsort(-own, kind="stable")
            for i in order:
                if int(i) not in moved and counts[labels[i]] > 1:
                    counts[labels[i]] -= 1
                    labels[i] = c
                    counts[c] += 1
                    moved.add(int(i))
                    break
        return labels


# ---------------------------------------------------------------------------
# Ward agglomerative merging
# ---------------------------------------------------------------------------

def ward_merge_cost(size_a: int, mean_a, size_b: int, mean_b) -> float:
    """Increase in total within-cluster variance from merging a and b."""
    diff = np.asarray(mean_a, dtype=float) - np.asarray(mean_b, dtype=float)
    return size_a * size_b / (size_a + size_b) * float(diff @ diff)


class WardAgglomerative(ClusterMixin, BaseEstimator):
    """Greedy Ward's-criterion agglomeration, optionally connectivity-constrained.

    With a connectivity edge list, only cluster pairs joined by at least
    one edge may merge; when no connected pair remains before reaching
    ``n_clusters``, merging falls back to unrestricted with a warning
    (``fallback_`` records it). ``merges_`` lists each step as
    (members_a, members_b, cost) with min(a) < min(b); ``merge_heights_``
    is the cost sequence (the dendrogram-height report).
    """

    def __init__(self, n_clusters: int = 15, connectivity=None):
        self.n_clusters = n_clusters
        self.connectivity = connectivity

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        n = X.shape[0]
        k = check_positive_int(self.n_clusters, "n_clusters")
        if k > n:
            raise ParameterError(f"n_clusters={k} exceeds n_points={n}")

        members: list[tuple[int, ...]] = [(i,) for i in range(n)]
        sizes = [1] * n
        centroids = [X[i].copy() for i in range(n)]

        adjacency: list[set[int]] | None = None
        if self.connectivity is not None:
            adjacency = [set() for _ in range(n)]
            for i, j, *_ in self.connectivity:
                i, j = int(i), int(j)
                if not (0 <= i < n and 0 <= j < n):
                    raise ParameterError(f"connectivity edge ({i},{j}) out of range")
                if i != j:
                    adjacency[i].add(j)
                    adjacency[j].add(i)

        merges: list[tuple[tuple[int, ...], tuple[int, ...], float]] = []
        fallback = False
        alive = list(range(n))
        while len(alive) > k:
            best = None
            for ai in range(len(alive)):
                a = alive[ai]
                for b in alive[ai + 1 :]:
                    if adjacency is not None and not fallback and b not in adjacency[a]:
                        continue
                    cost = ward_merge_cost(sizes[a], centroids[a], sizes[b], centroids[b])
                    key = (cost, members[a][0], members[b][0])
                    if best is None or key < best[0]:
                        best = (key, a, b)
            if best is None:
                fallback = True
                warnings.warn(
                    "connectivity graph exhausted before reaching n_clusters; "
                    "falling back to unrestricted merging",
                    GraphfolioWarning,
                )
                continue
            _, a, b = best
            cost = best[0][0]
            merges.append((members[a], members[b], cost))
            total = sizes[a] + sizes[b]
            centroids[a] = (sizes[a] * centroids[a] + sizes[b] * centroids[b]) / total
            members[a] = tuple(sorted(members[a] + members[b]))
            sizes[a] = total
            if adjacency is not None:
                adjacency[a] |= adjacency[b]
                for c in adjacency[b]:
                    adjacency[c].discard(b)
                    if c != a:
                        adjacency[c].add(a)
                adjacency[a].discard(a)
                adjacency[a].discard(b)
                adjacency[b].clear()
            alive.remove(b)

        order = sorted(alive, key=lambda c: members[c][0])
        labels = np.empty(n, dtype=np.int64)
        for cid, c in enumerate(order):
            labels[list(members[c])] = cid
        self.labels_ = labels
        self.cluster_centers_ = np.vstack([centroids[c] for c in order])
        self.merges_ = merges
        self.merge_heights_ = [m[2] for m in merges]
        self.fallback_ = fallback
        return self


# ---------------------------------------------------------------------------
# Affinity propagation
# ---------------------------------------------------------------------------

def update_messages(S, R, A, damping: float) -> tuple[np.ndarray, np.ndarray]:
    """One damped sweep of the responsibility/availability updates.

    r(i,k) <- s(i,k) - max_{k'!=k} (a(i,k') + s(i,k'))
    a(i,k) <- min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k)))   i != k
    a(k,k) <- sum_{i'!=k} max(0, r(i',k))

    each blended as damping*old + (1-damping)*computed. Responsibilities
    are updated first and feed the availability update.
    """
    n = S.shape[0]
    rows = np.arange(n)

    AS = A + S
    top = AS.argmax(axis=1)
    first = AS[rows, top]
    AS[rows, top] = -np.inf
    second = AS.max(axis=1)
    r_new = S - first[:, None]
    r_new[rows, top] = S[rows, top] - second
    R = damping * R + (1.0 - damping) * r_new

    r_pos = np.maximum(R, 0.0)
    np.fill_diagonal(r_pos, 0.0)
    col_sums = r_pos.sum(axis=0)
    a_new = np.minimum(R.diagonal()[None, :] + col_sums[None, :] - r_pos, 0.0)
    np.fill_diagonal(a_new, col_sums)
    A = damping * A + (1.0 - damping) * a_new
    return R, A


class AffinityPropagation(ClusterMixin, BaseEstimator):
    """Exemplar-based clustering by message passing.

    Similarity is negative squared Euclidean distance; the shared
    self-similarity (``preference``, default: median off-diagonal
    similarity) controls how many exemplars emerge. Iteration stops once
    the exemplar set {k : r(k,k) + a(k,k) > 0} is unchanged for
    ``convergence_iters`` consecutive sweeps.

    Degenerate geometry (e.g. all points identical) reaches a stationary
    message state with an empty exemplar set; the fit then falls back to a
    single exemplar, argmax of r(k,k) + a(k,k). A non-stationary run that
    exhausts ``max_iter`` without any exemplar raises
    :class:`ConvergenceError` carrying the final messages.
    """

    def __init__(self, damping: float = 0.5, preference: float | None = None,
                 max_iter: int = 1000, convergence_iters: int = 15):
        self.damping = damping
        self.preference = preference
        self.max_iter = max_iter
        self.convergence_iters = convergence_iters

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        n = X.shape[0]
        if n < 2:
            raise ParameterError("need at least 2 points")
        damping = check_in_range(self.damping, "damping", 0.5, 1.0, inclusive_hi=False)
        max_iter = check_positive_int(self.max_iter, "max_iter")
        conv_iters = check_positive_int(self.convergence_iters, "convergence_iters")

        sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        S = -sq
        off = ~np.eye(n, dtype=bool)
        pref = float(np.median(S[off])) if self.preference is None else float(self.preference)
        np.fill_diagonal(S, pref)

        R = np.zeros((n, n))
        A = np.zeros((n, n))
        exemplars = np.zeros(n, dtype=bool)
        stable = 0
        converged = False
        n_iter = 0
        for n_iter in range(1, max_iter + 1):
            R, A = update_messages(S, R, A, damping)
            current = (np.diag(R) + np.diag(A)) > 0
            if np.array_equal(current, exemplars):
                stable += 1
            else:
                stable = 0
            exemplars = current
            if stable >= conv_iters:
                converged = True
                break

        exemplar_idx = np.nonzero(exemplars)[0]
        if exemplar_idx.size == 0:
            if not converged:
                raise ConvergenceError(
                    f"no exemplar emerged within {n_iter} iterations",
                    last=(R, A), n_iter=n_iter,
                )
            warnings.warn(
                "degenerate geometry: message passing reached a stationary "
                "state with no exemplar; assigning a single cluster",
                GraphfolioWarning,
            )
            exemplar_idx = np.array([int(np.argmax(np.diag(R) + np.diag(A)))])
        elif not converged:
            warnings.warn(
                f"exemplar set still changing after {max_iter} iterations; "
                "using the final sweep's exemplars",
                GraphfolioWarning,
            )

        labels = np.asarray(S[:, exemplar_idx].argmax(axis=1), dtype=np.int64)
        for cid, e in enumerate(exemplar_idx):
            labels[e] = cid
        self.labels_ = labels
        self.exemplar_indices_ = exemplar_idx
        self.cluster_centers_ = X[exemplar_idx].copy()
        self.similarity_ = S
        self.responsibility_ = R
        self.availability_ = A
        self.n_iter_ = n_iter
        self.converged_ = converged
        return self


# ---------------------------------------------------------------------------
# Quarterly schedule
# ---------------------------------------------------------------------------

_DEFAULT_SPACE = {"kmeans": "pca", "ward": "spectral", "affinity": "spectral"}


def _embed_window(window: ReturnsPanel, space: str, embed_dim: int,
                  pca_components: int) -> np.ndarray:
    if space == "spectral":
        return SpectralEmbedding(n_components=embed_dim).fit_transform(window.returns)
    if space == "pca":
        pca = ReturnsPCA(n_components=pca_components).fit(window.returns)
        return pca.transform(window.returns)
    raise ParameterError(f"unknown embedding space {space!r}")


def cluster_window(
    window: ReturnsPanel,
    method: str,
    *,
    n_clusters_kmeans: int = 10,
    n_clusters_ward: int = 15,
    damping: float = 0.5,
    preference: float | None = None,
    ap_max_iter: int = 1000,
    ap_convergence_iters: int = 15,
    random_state: int = 0,
    space: str | None = None,
    embed_dim: int = 2,
    pca_components: int = 3,
    glasso_alpha: float | None = None,
) -> ClusterModel:
    """Embed one training window and cluster it with the chosen engine."""
    if method not in _DEFAULT_SPACE:
        raise ParameterError(f"method must be one of {sorted(_DEFAULT_SPACE)}, got {method!r}")
    space = _DEFAULT_SPACE[method] if space is None else space
    coords = _embed_window(window, space, embed_dim, pca_components)

    if method == "kmeans":
        eng = KMeans(n_clusters=n_clusters_kmeans, random_state=random_state).fit(coords)
        return ClusterModel(window.tickers, eng.labels_, eng.cluster_centers_,
                            coords, method)
    if method == "ward":
        edges = [(i, j) for i, j, _ in fit_precision_graph(window, alpha=glasso_alpha).edges]
        eng = WardAgglomerative(n_clusters=n_clusters_ward, connectivity=edges).fit(coords)
        return ClusterModel(window.tickers, eng.labels_, eng.cluster_centers_,
                            coords, method)
    eng = AffinityPropagation(
        damping=damping, preference=preference,
        max_iter=ap_max_iter, convergence_iters=ap_convergence_iters,
    ).fit(coords)
    return ClusterModel(window.tickers, eng.labels_, eng.cluster_centers_,
                        coords, method, exemplars=tuple(int(e) for e in eng.exemplar_indices_))


def cluster_export_rows(models: list[tuple[date, ClusterModel]]):
    """Rows (quarter, ticker, cluster_id, dist_to_center) for CSV export."""
    for q, model in models:
        for i, t in enumerate(model.tickers):
            cid = int(model.assignment[i])
            dist = float(np.linalg.norm(model.space[i] - model.centers[cid]))
            yield q, t, cid, dist


def quarterly_clusters(
    rp: ReturnsPanel,
    cal: TradingCalendar,
    method: str,
    static: bool = False,
    **params,
) -> list[tuple[date, ClusterModel]]:
    """Refreshed cluster models at each quarter start.

    For each quarter start q (beyond the first, which is training-only),
    stocks are embedded and clustered on the returns of [previous quarter
    start, q). With ``static`` set, the first quarter's model is reused
    for every later quarter (the fixed-cluster benchmark).
    """
    starts = cal.quarter_start_dates()
    if len(starts) < 2:
        raise InsufficientHistoryError(
            "need at least one full training quarter before the first output quarter"
        )
    out: list[tuple[date, ClusterModel]] = []
    static_model: ClusterModel | None = None
    for prev, q in zip(starts, starts[1:]):
        if static and static_model is not None:
            out.append((q, static_model))
            continue
        window = slice_window(rp, prev, q)
        if window.n_days < 10:
            raise InsufficientHistoryError(
                f"training window [{prev}, {q}) has only {window.n_days} trading days"
            )
        model = cluster_window(window, method, **params)
        if static:
            static_model = model
        out.append((q, model))
    return out
