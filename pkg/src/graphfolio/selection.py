"""Portfolio construction rules: volatility ranks, model reconstruction
extremes, and nearest-to-cluster-center picks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from datetime import date

import numpy as np

from .cluster import ClusterModel
from .errors import GraphfolioWarning, ParameterError
from .latent import ReconstructionReport, select_extreme
from .market_data import ReturnsPanel
from .validation import check_positive_int


@dataclass(frozen=True)
class PortfolioSpec:
    """A dated list of selected tickers with its strategy provenance tag."""

    as_of: date
    tickers: tuple[str, ...]
    strategy_tag: str

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if len(set(self.tickers)) != len(self.tickers):
            raise ParameterError("portfolio tickers must be distinct")


def _check_direction(direction: str) -> str:
    if direction not in ("max", "min"):
        raise ParameterError(f"direction must be 'max' or 'min', got {direction!r}")
    return direction


def _as_of(rp: ReturnsPanel, as_of: date | None) -> date:
    return rp.dates[-1] if as_of is None else as_of


def select_vol(rp: ReturnsPanel, direction: str, n: int = 10,
               as_of: date | None = None) -> PortfolioSpec:
    """Top/bottom-n stocks by sample standard deviation of daily returns."""
    _check_direction(direction)
    n = check_positive_int(n, "n")
    if n > rp.n_stocks:
        raise ParameterError(f"n={n} exceeds universe size {rp.n_stocks}")
    stds = rp.returns.std(axis=1, ddof=1)
    sign = -1.0 if direction == "max" else 1.0
    ranked = sorted(zip(rp.tickers, stds), key=lambda ts: (sign * ts[1], ts[0]))
    return PortfolioSpec(_as_of(rp, as_of), tuple(t for t, _ in ranked[:n]),
                         f"vol_{direction}")


def select_avgret_over_vol(rp: ReturnsPanel, direction: str, n: int = 10,
                           as_of: date | None = None) -> PortfolioSpec:
    """Top/bottom-n stocks by mean daily return over its standard deviation.

    Zero-variance stocks are unrankable (division) and excluded.
    """
    _check_direction(direction)
    n = check_positive_int(n, "n")
    stds = rp.returns.std(axis=1, ddof=1)
    means = rp.returns.mean(axis=1)
    rankable = [
        (t, means[i] / stds[i]) for i, t in enumerate(rp.tickers) if stds[i] > 0
    ]
    if len(rankable) < n:
        raise ParameterError(
            f"only {len(rankable)} stocks have positive variance, need {n}"
        )
    sign = -1.0 if direction == "max" else 1.0
    ranked = sorted(rankable, key=lambda ts: (sign * ts[1], ts[0]))
    return PortfolioSpec(_as_of(rp, as_of), tuple(t for t, _ in ranked[:n]),
                         f"avgretvol_{direction}")


def select_model_extreme(report: ReconstructionReport, direction: str, n: int = 10,
                         tag: str = "model", as_of: date | None = None) -> PortfolioSpec:
    """Reconstruction-difference portfolio from a latent-model report."""
    tickers = select_extreme(report, direction, n)
    stamp = date.min if as_of is None else as_of
    return PortfolioSpec(stamp, tuple(tickers), f"{tag}_{direction}")


def select_cluster_nearest(cm: ClusterModel, per_cluster: int = 10,
                           as_of: date | None = None,
                           tag: str | None = None) -> PortfolioSpec:
    """Per cluster, the ``per_cluster`` members nearest its center.

    Clusters with fewer than ``per_cluster`` members contribute nothing;
    an entirely empty selection is legal and flagged with a warning.
    """
    per_cluster = check_positive_int(per_cluster, "per_cluster")
    picked: list[str] = []
    for cid in range(cm.n_clusters):
        members = cm.members(cid)
        if members.size < per_cluster:
            continue
        dists = np.linalg.norm(cm.space[members] - cm.centers[cid], axis=1)
        ranked = sorted(
            zip(dists, (cm.tickers[i] for i in members)), key=lambda dt: (dt[0], dt[1])
        )
        picked.extend(t for _, t in ranked[:per_cluster])
    if not picked:
        warnings.warn(
            f"no cluster has >= {per_cluster} members; portfolio is empty",
            GraphfolioWarning,
        )
    stamp = date.min if as_of is None else as_of
    return PortfolioSpec(stamp, tuple(picked), tag or cm.method)


def select_kmeans_benchmark(cm: ClusterModel, as_of: date | None = None,
                            tag: str = "kmeans") -> PortfolioSpec:
    """One stock per cluster: the member nearest its cluster center."""
    picked = []
    for cid in range(cm.n_clusters):
        members = cm.members(cid)
        dists = np.linalg.norm(cm.space[members] - cm.centers[cid], axis=1)
        ranked = sorted(
            zip(dists, (cm.tickers[i] for i in members)), key=lambda dt: (dt[0], dt[1])
        )
        picked.append(ranked[0][1])
    stamp = date.min if as_of is None else as_of
    return PortfolioSpec(stamp, tuple(picked), tag)
