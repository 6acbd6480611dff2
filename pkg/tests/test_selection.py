"""Selector contracts: rank orders, tie rules, skip rules, and invariances."""

from datetime import date

import numpy as np
import pytest

from graphfolio.cluster import ClusterModel
from graphfolio.errors import GraphfolioWarning, ParameterError
from graphfolio.latent import ReconstructionReport, select_extreme
from graphfolio.selection import (
    select_avgret_over_vol,
    select_cluster_nearest,
    select_kmeans_benchmark,
    select_model_extreme,
    select_vol,
)

from conftest import make_returns_panel


def heteroskedastic_panel(seed=0, n=20, days=120):
    rng = np.random.default_rng(seed)
    scales = np.linspace(0.005, 0.04, n)
    returns = scales[:, None] * rng.standard_normal((n, days)) + 0.0003
    return make_returns_panel([f"T{i:02d}" for i in range(n)], returns)


class TestSelectVol:
    def test_argmax(self):
        rp = make_returns_panel(
            ["A", "B", "C"],
            np.vstack([
                0.03 * np.array([1, -1, 1, -1]),
                0.01 * np.array([1, -1, 1, -1]),
                0.02 * np.array([1, -1, 1, -1]),
            ]),
        )
        assert select_vol(rp, "max", 1).tickers == ("A",)

    def test_zero_std_wins_min(self):
        rp = make_returns_panel(
            ["A", "B"], np.vstack([[0.01, 0.01, 0.01], [0.0, 0.02, -0.01]])
        )
        assert select_vol(rp, "min", 1).tickers == ("A",)

    def test_both_directions_match_sort_oracle(self):
        rp = heteroskedastic_panel()
        stds = {t: float(np.std(rp.returns[i], ddof=1)) for i, t in enumerate(rp.tickers)}
        by_std = sorted(rp.tickers, key=lambda t: (stds[t], t))
        assert select_vol(rp, "min", 10).tickers == tuple(by_std[:10])
        by_std_desc = sorted(rp.tickers, key=lambda t: (-stds[t], t))
        assert select_vol(rp, "max", 10).tickers == tuple(by_std_desc[:10])

    def test_max_min_disjoint(self):
        rp = heteroskedastic_panel(seed=1)
        hi = set(select_vol(rp, "max", 10).tickers)
        lo = set(select_vol(rp, "min", 10).tickers)
        assert hi.isdisjoint(lo)

    def test_scaling_invariance(self):
        rp = heteroskedastic_panel(seed=2)
        scaled = make_returns_panel(rp.tickers, 3.7 * rp.returns)
        assert select_vol(rp, "max", 5).tickers == select_vol(scaled, "max", 5).tickers

    def test_n_too_large(self):
        rp = heteroskedastic_panel()
        with pytest.raises(ParameterError):
            select_vol(rp, "max", 21)

    def test_strategy_tag_and_as_of(self):
        rp = heteroskedastic_panel()
        spec = select_vol(rp, "max", 3, as_of=date(2015, 1, 2))
        assert spec.strategy_tag == "vol_max"
        assert spec.as_of == date(2015, 1, 2)


class TestSelectAvgRetOverVol:
    def test_ratio_argmax(self):
        rp = make_returns_panel(
            ["A", "B"],
            np.vstack([
                [0.012, -0.008, 0.002],   # mean 0.002
                [0.011, -0.009, 0.001],   # mean 0.001, same std
            ]),
        )
        assert select_avgret_over_vol(rp, "max", 1).tickers == ("A",)

    def test_negative_mean_ranks_below_zero_mean(self):
        rp = make_returns_panel(
            ["NEG", "ZERO"],
            np.vstack([[-0.01, -0.01, 0.005], [0.01, -0.01, 0.0]]),
        )
        assert select_avgret_over_vol(rp, "max", 1).tickers == ("ZERO",)

    def test_matches_two_pass_oracle(self):
        rp = heteroskedastic_panel(seed=3)
        ratios = {}
        for i, t in enumerate(rp.tickers):
            ratios[t] = float(np.mean(rp.returns[i])) / float(np.std(rp.returns[i], ddof=1))
        oracle = sorted(rp.tickers, key=lambda t: (-ratios[t], t))[:10]
        assert select_avgret_over_vol(rp, "max", 10).tickers == tuple(oracle)

    def test_zero_std_excluded(self):
        rp = make_returns_panel(
            ["CONST", "X", "Y"],
            np.vstack([[0.01, 0.01], [0.02, -0.01], [0.005, 0.004]]),
        )
        with pytest.raises(ParameterError):
            select_avgret_over_vol(rp, "max", 3)
        assert "CONST" not in select_avgret_over_vol(rp, "max", 2).tickers


class TestSelectModelExtreme:
    def report(self):
        rng = np.random.default_rng(4)
        tickers = tuple(f"T{i:02d}" for i in range(10))
        return ReconstructionReport(tickers, rng.random(10), np.zeros((10, 2)))

    def test_delegates_to_select_extreme(self):
        report = self.report()
        spec = select_model_extreme(report, "min", 4, tag="pca")
        assert list(spec.tickers) == select_extreme(report, "min", 4)
        assert spec.strategy_tag == "pca_min"

    def test_max_min_partition_even_universe(self):
        report = self.report()
        hi = set(select_model_extreme(report, "max", 5).tickers)
        lo = set(select_model_extreme(report, "min", 5).tickers)
        assert hi | lo == set(report.tickers)
        assert hi.isdisjoint(lo)


def grid_model(sizes, seed=0, d=2, method="kmeans", spread=30.0):
    """Clusters of the given sizes placed far apart on a line."""
    rng = np.random.default_rng(seed)
    points, labels, centers = [], [], []
    for cid, size in enumerate(sizes):
        center = np.zeros(d)
        center[0] = spread * cid
        pts = center + rng.standard_normal((size, d))
        points.append(pts)
        labels.extend([cid] * size)
        centers.append(pts.mean(axis=0))
    space = np.vstack(points)
    tickers = tuple(f"T{i:02d}" for i in range(len(space)))
    return ClusterModel(tickers, np.array(labels), np.vstack(centers), space, method)


class TestSelectClusterNearest:
    def test_small_cluster_contributes_nothing(self):
        cm = grid_model([9])
        with pytest.warns(GraphfolioWarning, match="empty"):
            spec = select_cluster_nearest(cm, per_cluster=10)
        assert spec.tickers == ()

    def test_exact_size_cluster_saturates(self):
        cm = grid_model([10])
        spec = select_cluster_nearest(cm, per_cluster=10)
        assert set(spec.tickers) == set(cm.tickers)

    def test_matches_distance_sort_oracle(self):
        cm = grid_model([12, 15], seed=5)
        spec = select_cluster_nearest(cm, per_cluster=10)
        assert len(spec.tickers) == 20
        picked = set()
        for cid in (0, 1):
            members = np.nonzero(cm.assignment == cid)[0]
            dists = {
                cm.tickers[i]: float(np.linalg.norm(cm.space[i] - cm.centers[cid]))
                for i in members
            }
            picked |= set(sorted(dists, key=lambda t: (dists[t], t))[:10])
        assert set(spec.tickers) == picked

    def test_output_size_sums_qualifying_clusters(self):
        cm = grid_model([12, 9, 30, 10], seed=6)
        spec = select_cluster_nearest(cm, per_cluster=10)
        assert len(spec.tickers) == 30  # 10 + 0 + 10 + 10


class TestSelectKMeansBenchmark:
    def test_single_cluster_nearest_to_mean(self):
        cm = grid_model([7], seed=7)
        spec = select_kmeans_benchmark(cm)
        dists = np.linalg.norm(cm.space - cm.centers[0], axis=1)
        assert spec.tickers == (cm.tickers[int(np.argmin(dists))],)

    def test_k_equals_n_selects_all(self):
        rng = np.random.default_rng(8)
        space = rng.standard_normal((6, 2))
        cm = ClusterModel(tuple(f"T{i}" for i in range(6)), np.arange(6),
                          space.copy(), space, "kmeans")
        assert set(select_kmeans_benchmark(cm).tickers) == set(cm.tickers)

    def test_matches_argmin_per_cluster_oracle(self):
        cm = grid_model([5] * 10, seed=9)
        spec = select_kmeans_benchmark(cm)
        assert len(spec.tickers) == 10
        for cid in range(10):
            members = np.nonzero(cm.assignment == cid)[0]
            dists = {
                cm.tickers[i]: float(np.linalg.norm(cm.space[i] - cm.centers[cid]))
                for i in members
            }
            best = min(sorted(dists), key=lambda t: (dists[t], t))
            assert best in spec.tickers
