"""Price/returns panels, trading calendar, CSV ingestion, and synthetic fixtures.

The data-matrix convention throughout the package is rows = stocks,
columns = trading days. Panels are immutable after construction (arrays
are copied and marked read-only) and safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    EmptyUniverseError,
    EmptyWindowError,
    InsufficientHistoryError,
    ParameterError,
)


def _frozen_array(values) -> np.ndarray:
    a = np.array(values, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Aligned adjusted-close prices.

    Attributes
    ----------
    tickers : tuple of str
        Stock identifiers, lexicographically sorted.
    dates : tuple of datetime.date
        Strictly increasing trading dates.
    prices : ndarray, shape (n_stocks, n_days)
        Strictly positive, finite adjusted-close prices.
    sectors : dict or None
        Optional ticker -> sector label map.
    """

    tickers: tuple[str, ...]
    dates: tuple[date, ...]
    prices: np.ndarray
    sectors: dict[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices", _frozen_array(self.prices))
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers in panel")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        if self.prices.shape != (len(self.tickers), len(self.dates)):
            raise DataError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates"
            )
        if not np.isfinite(self.prices).all() or (self.prices <= 0).any():
            raise DataError("prices must be strictly positive and finite")

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PricePanel):
            return NotImplemented
        return (
            self.tickers == other.tickers
            and self.dates == other.dates
            and self.sectors == other.sectors
            and np.array_equal(self.prices, other.prices)
        )


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    """Simple daily returns, one column per trading day.

    ``returns[i, t] = prices[i, t+1] / prices[i, t] - 1``; the date of a
    return is the later day of the pair, so ``dates`` has one entry fewer
    than the originating price panel.
    """

    tickers: tuple[str, ...]
    dates: tuple[date, ...]
    returns: np.ndarray
    sectors: dict[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "returns", _frozen_array(self.returns))
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers in panel")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        if self.returns.shape != (len(self.tickers), len(self.dates)):
            raise DataError(
                f"returns matrix shape {self.returns.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates"
            )
        if not np.isfinite(self.returns).all():
            raise DataError("returns must be finite")

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def ticker_index(self, ticker: str) -> int:
        try:
            return self.tickers.index(ticker)
        except ValueError:
            raise ParameterError(f"unknown ticker {ticker!r}") from None

    def restrict(self, tickers) -> "ReturnsPanel":
        """Panel restricted to the given tickers, in the given order."""
        idx = [self.ticker_index(t) for t in tickers]
        sectors = None
        if self.sectors is not None:
            sectors = {t: self.sectors[t] for t in tickers if t in self.sectors}
        return ReturnsPanel(tuple(tickers), self.dates, self.returns[idx], sectors)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReturnsPanel):
            return NotImplemented
        return (
            self.tickers == other.tickers
            and self.dates == other.dates
            and self.sectors == other.sectors
            and np.array_equal(self.returns, other.returns)
        )


@dataclass(frozen=True)
class TradingCalendar:
    """Index lists into a trading-date sequence.

    ``month_starts``/``quarter_starts`` hold indices of the first trading
    date of each calendar month, respectively of each quarter (first
    trading date whose month is Jan/Apr/Jul/Oct). ``year_windows`` maps a
    calendar year to its half-open index range [lo, hi).
    """

    dates: tuple[date, ...]
    month_starts: tuple[int, ...]
    quarter_starts: tuple[int, ...]
    year_windows: dict[int, tuple[int, int]]

    @classmethod
    def from_dates(cls, dates) -> "TradingCalendar":
        dates = tuple(dates)
        if not dates:
            raise EmptyWindowError("cannot build a calendar from zero dates")
        month_starts = [
            i
            for i, d in enumerate(dates)
            if i == 0 or (d.year, d.month) != (dates[i - 1].year, dates[i - 1].month)
        ]
        quarter_starts = [i for i in month_starts if dates[i].month in (1, 4, 7, 10)]
        year_windows: dict[int, tuple[int, int]] = {}
        for i, d in enumerate(dates):
            lo, hi = year_windows.get(d.year, (i, i))
            year_windows[d.year] = (lo, i + 1)
        return cls(dates, tuple(month_starts), tuple(quarter_starts), year_windows)

    @property
    def years(self) -> list[int]:
        return sorted(self.year_windows)

    def month_start_dates(self) -> list[date]:
        return [self.dates[i] for i in self.month_starts]

    def quarter_start_dates(self) -> list[date]:
        return [self.dates[i] for i in self.quarter_starts]


def load_sectors(path) -> dict[str, str]:
    """Read an optional ``ticker,sector`` map CSV."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"sector file not found: {path}")
    sectors: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["ticker", "sector"]:
            raise DataError("sector file must start with header 'ticker,sector'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise DataError("expected 'ticker,sector' row", line=lineno)
            sectors[row[0].strip()] = row[1].strip()
    return sectors


def load_prices(
    path,
    drop_incomplete: bool = True,
    sectors: dict[str, str] | None = None,
) -> tuple[PricePanel, dict[str, str]]:
    """Load an adjusted-close price CSV into a validated panel.

    The file format is a header row ``date,<TICKER1>,<TICKER2>,...``
    followed by one row per trading day; empty cells mark missing data.
    Stocks with any missing, non-positive, or non-finite cell are dropped
    when ``drop_incomplete`` is set (the returned report maps each dropped
    ticker to the reason); otherwise such cells raise.

    Returns
    -------
    (PricePanel, dict)
        The surviving panel with tickers in lexicographic order, and the
        drop report.

    Raises
    ------
    DataError
        Malformed file (with line number) or, when ``drop_incomplete`` is
        false, any invalid cell.
    EmptyUniverseError
        When no stock survives.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"price file not found: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip().lower() != "date" or len(header) < 2:
            raise DataError("header must be 'date,<TICKER>,...'", line=1)
        tickers = [c.strip() for c in header[1:]]
        if any(not t for t in tickers):
            raise DataError("empty ticker name in header", line=1)
        if len(set(tickers)) != len(tickers):
            dupes = sorted({t for t in tickers if tickers.count(t) > 1})
            raise DataError(f"duplicate tickers in header: {dupes}", line=1)

        rows: list[tuple[date, list[float | None], int]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(tickers) + 1:
                raise DataError(
                    f"expected {len(tickers) + 1} cells, found {len(row)}", line=lineno
                )
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"bad date {row[0]!r} (want YYYY-MM-DD)", line=lineno) from None
            cells: list[float | None] = []
            for ticker, cell in zip(tickers, row[1:]):
                cell = cell.strip()
                if not cell:
                    cells.append(None)
                    continue
                try:
                    cells.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"bad price {cell!r} for {ticker}", line=lineno
                    ) from None
            rows.append((d, cells, lineno))

    if not rows:
        raise EmptyUniverseError("price file holds no data rows")
    rows.sort(key=lambda r: r[0])
    for (d1, _, _), (d2, _, l2) in zip(rows, rows[1:]):
        if d1 == d2:
            raise DataError(f"duplicate date {d2}", line=l2)

    dates = tuple(r[0] for r in rows)
    dropped: dict[str, str] = {}
    order = sorted(range(len(tickers)), key=lambda j: tickers[j])
    kept_tickers: list[str] = []
    kept_columns: list[list[float]] = []
    for j in order:
        ticker = tickers[j]
        reason = None
        for d, cells, _ in rows:
            v = cells[j]
            if v is None:
                reason = f"missing value on {d}"
            elif not np.isfinite(v):
                reason = f"non-finite price on {d}"
            elif v <= 0:
                reason = f"non-positive price {v} on {d}"
            if reason:
                break
        if reason:
            if not drop_incomplete:
                raise DataError(f"ticker {ticker}: {reason}")
            dropped[ticker] = reason
        else:
            kept_tickers.append(ticker)
            kept_columns.append([cells[j] for _, cells, _ in rows])

    if not kept_tickers:
        raise EmptyUniverseError("no stock has a complete positive price history")

    prices = np.array(kept_columns, dtype=np.float64)
    panel_sectors = None
    if sectors is not None:
        panel_sectors = {t: sectors[t] for t in kept_tickers if t in sectors}
    return PricePanel(tuple(kept_tickers), dates, prices, panel_sectors), dropped


def compute_returns(panel: PricePanel) -> ReturnsPanel:
    """Simple daily returns from an aligned price panel."""
    if panel.n_days < 2:
        raise InsufficientHistoryError(
            f"need at least 2 price dates, have {panel.n_days}"
        )
    returns = panel.prices[:, 1:] / panel.prices[:, :-1] - 1.0
    return ReturnsPanel(panel.tickers, panel.dates[1:], returns, panel.sectors)


def returns_to_prices(rp: ReturnsPanel, base: float = 100.0) -> PricePanel:
    """Compound a returns panel back into prices, starting every stock at ``base``.

    The synthesized zeroth price date is the weekday before the first
    return date.
    """
    if base <= 0:
        raise ParameterError("base price must be positive")
    growth = np.cumprod(1.0 + rp.returns, axis=1)
    prices = base * np.hstack([np.ones((rp.n_stocks, 1)), growth])
    first = rp.dates[0] - timedelta(days=1)
    while first.weekday() >= 5:
        first -= timedelta(days=1)
    return PricePanel(rp.tickers, (first,) + rp.dates, prices, rp.sectors)


def slice_window(rp: ReturnsPanel, start: date, end: date) -> ReturnsPanel:
    """Panel restricted to return dates in the half-open window [start, end)."""
    if start > end:
        raise ParameterError(f"window start {start} is after end {end}")
    idx = [i for i, d in enumerate(rp.dates) if start <= d < end]
    if not idx:
        raise EmptyWindowError(f"no trading dates in [{start}, {end})")
    dates = tuple(rp.dates[i] for i in idx)
    return ReturnsPanel(rp.tickers, dates, rp.returns[:, idx], rp.sectors)


def weekday_dates(start: date, n_days: int) -> tuple[date, ...]:
    """The first ``n_days`` weekdays on or after ``start``."""
    out = []
    d = start
    while len(out) < n_days:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return tuple(out)


# Synthetic-market knobs: factor vol/means are chosen so factor groups are
# clearly correlated (min within-group correlation ~0.3 at the noisiest
# stock) while per-stock idiosyncratic scale still spreads total vol enough
# to distinguish Max/Min-volatility portfolios.
_FACTOR_VOL = 0.012
_FACTOR_MU_BASE = 0.0004
_FACTOR_MU_STEP = 0.0003
_IDIO_LO, _IDIO_HI = 0.002, 0.022


def synth_returns(
    n_stocks: int,
    n_days: int,
    n_factors: int,
    seed: int,
    noise_scale: float = 1.0,
    start: date = date(2012, 1, 2),
) -> ReturnsPanel:
    """Seeded synthetic returns from a linear factor model.

    ``returns = loadings @ factors + noise`` where every stock loads mostly
    on one factor (its "sector") and idiosyncratic noise scale varies per
    stock (heteroskedastic). With ``noise_scale=0`` the matrix has rank at
    most ``n_factors``. Bit-identical output for equal arguments.
    """
    for name, v in (("n_stocks", n_stocks), ("n_days", n_days), ("n_factors", n_factors)):
        if v < 1:
            raise ParameterError(f"{name} must be >= 1, got {v}")
    if noise_scale < 0:
        raise ParameterError("noise_scale must be non-negative")

    rng = np.random.default_rng(seed)
    groups = np.arange(n_stocks) % n_factors
    loadings = 0.08 * rng.standard_normal((n_stocks, n_factors))
    loadings[np.arange(n_stocks), groups] = 1.0 + 0.3 * rng.random(n_stocks)

    factor_mu = _FACTOR_MU_BASE + _FACTOR_MU_STEP * np.arange(n_factors)
    factors = factor_mu[:, None] + _FACTOR_VOL * rng.standard_normal((n_factors, n_days))

    idio = rng.permutation(np.linspace(_IDIO_LO, _IDIO_HI, n_stocks))
    noise = noise_scale * idio[:, None] * rng.standard_normal((n_stocks, n_days))

    returns = loadings @ factors + noise
    tickers = tuple(f"S{i:03d}" for i in range(n_stocks))
    sectors = {t: f"F{g}" for t, g in zip(tickers, groups)}
    return ReturnsPanel(tickers, weekday_dates(start, n_days), returns, sectors)


def synth_drift_returns(
    n_stocks: int,
    n_days: int,
    seed: int,
    block_size: int = 10,
    regime_length: int = 252,
    hot_mu: float = 0.004,
    hot_vol: float = 0.030,
    cold_vol: float = 0.012,
    cold_idio: float = 0.003,
    start: date = date(2012, 1, 2),
) -> ReturnsPanel:
    """Synthetic market whose profitable stocks migrate across regimes.

    Stocks form contiguous blocks of ``block_size``. In each regime of
    ``regime_length`` days one rotating block is "hot": its members earn
    ``hot_mu`` per day with mutually independent volatility ``hot_vol``,
    so they scatter widely in any embedding and occupy many clusters
    (one-per-cluster selection then loads up on them). Every other block
    is "cold": members share one zero-mean factor, forming a tight clump
    that collapses into a single cluster with a single representative.
    Reclustering on recent data tracks the current hot block; clusters
    fitted once go stale with their regime.
    """
    for name, v in (("n_stocks", n_stocks), ("n_days", n_days),
                    ("block_size", block_size), ("regime_length", regime_length)):
        if v < 1:
            raise ParameterError(f"{name} must be >= 1, got {v}")
    if block_size > n_stocks:
        raise ParameterError("block_size cannot exceed n_stocks")

    rng = np.random.default_rng(seed)
    returns = np.empty((n_stocks, n_days))
    n_blocks = -(-n_stocks // block_size)
    n_regimes = -(-n_days // regime_length)
    for r in range(n_regimes):
        lo, hi = r * regime_length, min((r + 1) * regime_length, n_days)
        span = hi - lo
        hot_block = r % n_blocks
        for b in range(n_blocks):
            rows = np.arange(b * block_size, min((b + 1) * block_size, n_stocks))
            if b == hot_block:
                returns[rows, lo:hi] = hot_mu + hot_vol * rng.standard_normal(
                    (rows.size, span)
                )
            else:
                factor = cold_vol * rng.standard_normal(span)
                returns[rows, lo:hi] = factor[None, :] + cold_idio * rng.standard_normal(
                    (rows.size, span)
                )
    tickers = tuple(f"S{i:03d}" for i in range(n_stocks))
    sectors = {t: f"B{i // block_size}" for i, t in enumerate(tickers)}
    return ReturnsPanel(tickers, weekday_dates(start, n_days), returns, sectors)
