"""Panel construction, CSV ingestion, calendar arithmetic, synthetic fixtures."""

from datetime import date

import numpy as np
import pytest

from graphfolio.errors import (
    DataError,
    EmptyUniverseError,
    EmptyWindowError,
    InsufficientHistoryError,
    ParameterError,
)
from graphfolio.market_data import (
    TradingCalendar,
    compute_returns,
    load_prices,
    load_sectors,
    returns_to_prices,
    slice_window,
    synth_returns,
    weekday_dates,
)

from conftest import make_price_panel, make_returns_panel


def write_csv(tmp_path, text, name="prices.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadPrices:
    def test_complete_panel_loads_identically(self, tmp_path):
        path = write_csv(
            tmp_path,
            "date,A,B,C\n"
            "2014-01-06,10,20,30\n"
            "2014-01-07,11,21,31\n"
            "2014-01-08,12,22,32\n"
            "2014-01-09,13,23,33\n"
            "2014-01-10,14,24,34\n",
        )
        panel, dropped = load_prices(path)
        assert dropped == {}
        assert panel.tickers == ("A", "B", "C")
        assert panel.n_days == 5
        assert panel.prices[0, 0] == 10 and panel.prices[2, 4] == 34

    def test_missing_cell_drops_ticker_and_reports(self, tmp_path):
        path = write_csv(
            tmp_path,
            "date,A,B,C\n2014-01-06,10,20,30\n2014-01-07,11,,31\n2014-01-08,12,22,32\n",
        )
        panel, dropped = load_prices(path)
        assert panel.tickers == ("A", "C")
        assert list(dropped) == ["B"]
        assert "missing" in dropped["B"]

    def test_negative_price_drops_ticker(self, tmp_path):
        # Oracle: manual scan of the fixture - only A has an invalid cell.
        path = write_csv(
            tmp_path,
            "date,A,B,C\n2014-01-06,10,20,30\n2014-01-07,-11,21,31\n2014-01-08,12,22,32\n",
        )
        panel, dropped = load_prices(path)
        assert panel.tickers == ("B", "C")
        assert "non-positive" in dropped["A"]

    def test_drop_disabled_raises_on_gap(self, tmp_path):
        path = write_csv(tmp_path, "date,A\n2014-01-06,10\n2014-01-07,\n")
        with pytest.raises(DataError, match="missing"):
            load_prices(path, drop_incomplete=False)

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = write_csv(tmp_path, "date,A,B\n2014-01-06,10,20\n2014-01-07,11\n")
        with pytest.raises(DataError, match="line 3"):
            load_prices(path)

    def test_bad_date_reports_line_number(self, tmp_path):
        path = write_csv(tmp_path, "date,A\n01/06/2014,10\n")
        with pytest.raises(DataError, match="line 2"):
            load_prices(path)

    def test_all_dropped_is_empty_universe(self, tmp_path):
        path = write_csv(tmp_path, "date,A\n2014-01-06,\n2014-01-07,10\n")
        with pytest.raises(EmptyUniverseError):
            load_prices(path)

    def test_duplicate_ticker_rejected(self, tmp_path):
        path = write_csv(tmp_path, "date,A,A\n2014-01-06,1,2\n")
        with pytest.raises(DataError, match="duplicate"):
            load_prices(path)

    def test_column_permutation_stable(self, tmp_path):
        a = write_csv(tmp_path, "date,B,A\n2014-01-06,20,10\n2014-01-07,21,11\n", "a.csv")
        b = write_csv(tmp_path, "date,A,B\n2014-01-06,10,20\n2014-01-07,11,21\n", "b.csv")
        pa, _ = load_prices(a)
        pb, _ = load_prices(b)
        assert pa == pb

    def test_rows_sorted_by_date(self, tmp_path):
        path = write_csv(
            tmp_path, "date,A\n2014-01-08,12\n2014-01-06,10\n2014-01-07,11\n"
        )
        panel, _ = load_prices(path)
        assert list(panel.prices[0]) == [10, 11, 12]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_prices(tmp_path / "nope.csv")


def test_load_sectors_roundtrip(tmp_path):
    path = write_csv(tmp_path, "ticker,sector\nA,tech\nB,energy\n", "sectors.csv")
    assert load_sectors(path) == {"A": "tech", "B": "energy"}


class TestComputeReturns:
    def test_simple_arithmetic(self):
        panel = make_price_panel(["A"], [[100.0, 110.0, 99.0]])
        rp = compute_returns(panel)
        np.testing.assert_allclose(rp.returns[0], [0.10, -0.10])
        assert rp.dates == panel.dates[1:]

    def test_constant_prices_zero_returns(self):
        panel = make_price_panel(["A"], [[50.0, 50.0, 50.0]])
        np.testing.assert_array_equal(compute_returns(panel).returns[0], [0.0, 0.0])

    def test_hand_arithmetic_oracle(self):
        panel = make_price_panel(["A"], [[100.0, 105.0, 105.0, 94.5]])
        np.testing.assert_allclose(
            compute_returns(panel).returns[0], [0.05, 0.0, -0.10], atol=1e-15
        )

    def test_single_date_insufficient(self):
        panel = make_price_panel(["A"], [[100.0]])
        with pytest.raises(InsufficientHistoryError):
            compute_returns(panel)

    def test_roundtrip_compounding_recovers_prices(self):
        rng = np.random.default_rng(3)
        prices = 50.0 * np.exp(np.cumsum(0.02 * rng.standard_normal((4, 40)), axis=1))
        panel = make_price_panel(["A", "B", "C", "D"], prices)
        rp = compute_returns(panel)
        rebuilt = prices[:, :1] * np.cumprod(1.0 + rp.returns, axis=1)
        np.testing.assert_allclose(rebuilt, prices[:, 1:], rtol=1e-12)


class TestSliceWindow:
    def test_full_range_identity(self):
        rp = make_returns_panel(["A", "B"], np.arange(20.0).reshape(2, 10) / 100)
        assert slice_window(rp, rp.dates[0], rp.dates[-1] + np.timedelta64(1, "D").item()) == rp

    def test_quarter_slice_counts(self):
        rp = synth_returns(3, 260, 2, seed=1)  # covers 2012-01-03 .. early 2013
        cal = TradingCalendar.from_dates(rp.dates)
        q2, q3 = date(2012, 4, 1), date(2012, 7, 1)
        window = slice_window(rp, q2, q3)
        expected = sum(1 for d in rp.dates if q2 <= d < q3)
        assert window.n_days == expected
        assert all(q2 <= d < q3 for d in window.dates)
        # quarter starts land on the first trading day of Apr/Jul
        starts = cal.quarter_start_dates()
        assert window.dates[0] in starts

    def test_before_first_date_empty(self):
        rp = make_returns_panel(["A"], [[0.01, 0.02]])
        with pytest.raises(EmptyWindowError):
            slice_window(rp, date(2000, 1, 1), date(2000, 2, 1))


class TestTradingCalendar:
    def test_month_and_quarter_starts(self):
        dates = weekday_dates(date(2014, 1, 6), 260)
        cal = TradingCalendar.from_dates(dates)
        months = [dates[i] for i in cal.month_starts]
        assert months[0] == date(2014, 1, 6)
        assert all(
            m.day <= 3 or m == date(2014, 1, 6) for m in months
        )  # first weekday of each month
        quarters = cal.quarter_start_dates()
        assert [q.month for q in quarters if q.year == 2014] == [1, 4, 7, 10]

    def test_year_windows_partition(self):
        dates = weekday_dates(date(2014, 6, 2), 400)
        cal = TradingCalendar.from_dates(dates)
        spans = sorted(cal.year_windows.values())
        assert spans[0][0] == 0 and spans[-1][1] == len(dates)
        for (a, b), (c, _) in zip(spans, spans[1:]):
            assert b == c


class TestSynthReturns:
    def test_same_seed_bit_identical(self):
        a = synth_returns(10, 50, 3, seed=42)
        b = synth_returns(10, 50, 3, seed=42)
        assert a == b

    def test_different_seed_differs(self):
        assert synth_returns(10, 50, 3, seed=1) != synth_returns(10, 50, 3, seed=2)

    def test_zero_noise_rank(self):
        rp = synth_returns(12, 60, 3, seed=5, noise_scale=0.0)
        assert np.linalg.matrix_rank(rp.returns, tol=1e-10) <= 3

    def test_factor_groups_recoverable_by_correlation(self):
        # Oracle: assign each stock to the group with the highest mean
        # correlation; must match the generator's sector labels.
        rp = synth_returns(50, 250, 3, seed=7)
        truth = np.array([int(rp.sectors[t][1]) for t in rp.tickers])
        corr = np.corrcoef(rp.returns)
        recovered = np.empty(50, dtype=int)
        for i in range(50):
            means = [
                np.mean([corr[i, j] for j in range(50) if truth[j] == g and j != i])
                for g in range(3)
            ]
            recovered[i] = int(np.argmax(means))
        assert np.array_equal(recovered, truth)

    def test_sector_labels_follow_factors(self):
        rp = synth_returns(9, 30, 3, seed=0)
        assert [rp.sectors[t] for t in rp.tickers] == [
            "F0", "F1", "F2", "F0", "F1", "F2", "F0", "F1", "F2"
        ]

    def test_invalid_counts(self):
        with pytest.raises(ParameterError):
            synth_returns(0, 10, 1, seed=0)


def test_returns_to_prices_roundtrip():
    rp = synth_returns(4, 30, 2, seed=9)
    panel = returns_to_prices(rp, base=100.0)
    back = compute_returns(panel)
    np.testing.assert_allclose(back.returns, rp.returns, atol=1e-12)
    assert back.dates == rp.dates
