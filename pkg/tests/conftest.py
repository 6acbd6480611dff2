"""Shared fixtures: tiny hand-built panels and the seeded synthetic market."""

from datetime import date

import numpy as np
import pytest

from graphfolio.market_data import (
    PricePanel,
    ReturnsPanel,
    TradingCalendar,
    synth_returns,
    weekday_dates,
)


def make_price_panel(tickers, prices, start=date(2014, 1, 6), sectors=None):
    prices = np.asarray(prices, dtype=float)
    dates = weekday_dates(start, prices.shape[1])
    return PricePanel(tuple(tickers), dates, prices, sectors)


def make_returns_panel(tickers, returns, start=date(2014, 1, 6), sectors=None):
    returns = np.asarray(returns, dtype=float)
    dates = weekday_dates(start, returns.shape[1])
    return ReturnsPanel(tuple(tickers), dates, returns, sectors)


@pytest.fixture(scope="session")
def synth_market():
    """3-factor, 50-stock, ~5-year heteroskedastic market (seed 7)."""
    return synth_returns(50, 1260, 3, seed=7)


@pytest.fixture(scope="session")
def synth_market_calendar(synth_market):
    return TradingCalendar.from_dates(synth_market.dates)


@pytest.fixture(scope="session")
def synth_year(synth_market):
    """First ~252 trading days of the synthetic market."""
    rp = synth_market
    return ReturnsPanel(rp.tickers, rp.dates[:252], rp.returns[:, :252], rp.sectors)


def blob_points(seed=0, centers=((0.0, 0.0), (10.0, 0.0), (0.0, 10.0)),
                per_blob=10, spread=0.5):
    """Well-separated Gaussian blobs with their true labels."""
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for lbl, c in enumerate(centers):
        points.append(np.asarray(c) + spread * rng.standard_normal((per_blob, len(c))))
        labels.extend([lbl] * per_blob)
    return np.vstack(points), np.array(labels)
