"""PCA estimator, reconstruction reports, and extreme/aggregate selection."""

import numpy as np
import pytest

from graphfolio.errors import ParameterError
from graphfolio.latent import (
    ReconstructionReport,
    ReturnsPCA,
    aggregate_selections,
    select_extreme,
)
from graphfolio.market_data import synth_returns

from conftest import make_returns_panel


class TestFitPCA:
    def test_rank_one_data_single_component(self):
        rng = np.random.default_rng(0)
        u = rng.standard_normal((6, 1))
        v = rng.standard_normal((1, 30))
        X = u @ v  # centered rows still rank <= 2, variance along one direction after centering
        X = X - X.mean(axis=0)  # exactly rank 1 around the column mean
        pca = ReturnsPCA(n_components=1).fit(X)
        assert pca.explained_variance_ratio_[0] == pytest.approx(1.0, abs=1e-10)

    def test_full_rank_recovery(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((8, 12))
        pca = ReturnsPCA(n_components=7).fit(X)
        panel = make_returns_panel([f"T{i}" for i in range(8)], X)
        report = pca.reconstruction_report(panel)
        assert report.errors.max() < 1e-10

    def test_zero_noise_factor_fixture(self):
        # Oracle: direct SVD of the centered fixture has rank 3, so k=3 is exact.
        rp = synth_returns(12, 60, 3, seed=5, noise_scale=0.0)
        centered = rp.returns - rp.returns.mean(axis=0)
        s = np.linalg.svd(centered, compute_uv=False)
        assert s[3] < 1e-10 * s[0]
        pca = ReturnsPCA(n_components=3).fit(rp.returns)
        report = pca.reconstruction_report(rp)
        assert report.errors.max() < 1e-8

    def test_components_orthonormal(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((15, 40))
        pca = ReturnsPCA(n_components=5).fit(X)
        gram = pca.components_ @ pca.components_.T
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-10)

    def test_sign_convention(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((10, 20))
        pca = ReturnsPCA(n_components=4).fit(X)
        for row in pca.components_:
            assert row[np.argmax(np.abs(row))] > 0

    def test_k_out_of_range(self):
        with pytest.raises(ParameterError):
            ReturnsPCA(n_components=6).fit(np.ones((5, 10)) + np.eye(5, 10))


class TestPcaReconstruct:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.X = rng.standard_normal((9, 25))
        self.pca = ReturnsPCA(n_components=3).fit(self.X)

    def test_mean_vector_zero_error(self):
        panel = make_returns_panel(["M"], self.pca.mean_[None, :])
        report = self.pca.reconstruction_report(panel)
        assert report.errors[0] == pytest.approx(0.0, abs=1e-12)

    def test_in_span_zero_error(self):
        x = self.pca.mean_ + 2.5 * self.pca.components_[0] - 1.0 * self.pca.components_[2]
        report = self.pca.reconstruction_report(make_returns_panel(["S"], x[None, :]))
        assert report.errors[0] < 1e-10

    def test_orthogonal_component_error_is_norm(self):
        # Build v orthogonal to the span by Gram-Schmidt; oracle = ||v||.
        rng = np.random.default_rng(5)
        v = rng.standard_normal(25)
        for row in self.pca.components_:
            v -= (v @ row) * row
        report = self.pca.reconstruction_report(
            make_returns_panel(["O"], (self.pca.mean_ + v)[None, :])
        )
        assert report.errors[0] == pytest.approx(np.linalg.norm(v), rel=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError):
            self.pca.transform(np.zeros((3, 7)))

    def test_error_nonincreasing_in_k(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((10, 30))
        panel = make_returns_panel([f"T{i}" for i in range(10)], X)
        totals = [
            ReturnsPCA(n_components=k).fit(X).reconstruction_report(panel).errors.sum()
            for k in range(1, 9)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(totals, totals[1:]))

    def test_projection_idempotent(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((8, 25))
        project = lambda A: self.pca.inverse_transform(self.pca.transform(A))
        once = project(X)
        twice = project(once)
        assert np.abs(once - twice).max() < 1e-12


class TestSelectExtreme:
    def report(self, tickers, errors):
        return ReconstructionReport(tuple(tickers), np.asarray(errors, float),
                                    np.zeros((len(tickers), 2)))

    def test_argmax(self):
        assert select_extreme(self.report("ABC", [3, 1, 2]), "max", 1) == ["A"]

    def test_tie_rule_lexicographic(self):
        assert select_extreme(self.report("CAB", [1, 1, 1]), "min", 2) == ["A", "B"]

    def test_min_matches_sort_oracle(self):
        rng = np.random.default_rng(8)
        errors = rng.random(30)
        tickers = [f"T{i:02d}" for i in range(30)]
        got = select_extreme(self.report(tickers, errors), "min", 10)
        oracle = [t for _, t in sorted(zip(errors, tickers))][:10]
        assert got == oracle

    def test_n_too_large(self):
        with pytest.raises(ParameterError):
            select_extreme(self.report("AB", [1, 2]), "max", 3)


class TestAggregateSelections:
    def test_identical_runs(self):
        runs = [["A", "B", "C"]] * 10
        assert aggregate_selections(runs, 3) == ["A", "B", "C"]

    def test_counting(self):
        runs = [["A", "B"]] * 9 + [["A", "C"]]
        assert aggregate_selections(runs, 2) == ["A", "B"]

    def test_brute_force_tally_oracle(self):
        rng = np.random.default_rng(9)
        universe = [f"T{i:02d}" for i in range(25)]
        runs = [list(rng.choice(universe, size=10, replace=False)) for _ in range(10)]
        got = aggregate_selections(runs, 10)
        counts = {t: sum(t in run for run in runs) for t in universe}
        oracle = sorted(universe, key=lambda t: (-counts[t], t))[:10]
        assert got == oracle

    def test_too_few_distinct(self):
        with pytest.raises(ParameterError):
            aggregate_selections([["A"], ["A"]], 2)

    def test_empty_runs(self):
        with pytest.raises(ParameterError):
            aggregate_selections([], 1)
