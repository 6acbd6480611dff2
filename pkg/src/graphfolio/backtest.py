"""Portfolio simulation: monthly rebalancing to target weights, quarterly
recluster-and-replace, benchmark buy-and-hold, and performance metrics.

Conventions: fractional shares, zero transaction costs, cash earns zero.
A trade (initial buy, monthly rebalance, quarterly replacement) executes
at the close of its trading day, after that day's return has been applied
to the existing holdings. The equity curve starts at the buy-date close
with the initial capital; when the panel has a trading day before the
simulation window, it serves as the buy date so the first simulated day's
return is captured.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from .cluster import ClusterModel, quarterly_clusters
from .errors import (
    DataError,
    EmptyWindowError,
    GraphfolioWarning,
    InsufficientHistoryError,
    ParameterError,
)
from .market_data import ReturnsPanel, TradingCalendar
from .selection import PortfolioSpec, select_cluster_nearest, select_kmeans_benchmark
from .allocation import TRADING_DAYS_PER_YEAR, WeightVector

SQRT_ANNUAL = math.sqrt(TRADING_DAYS_PER_YEAR)


@dataclass(frozen=True)
class BacktestConfig:
    """Simulation controls shared by the runner functions."""

    start: date
    end: date
    initial_capital: float = 10_000.0
    rebalance: str = "monthly"       # "monthly" | "none"
    recluster: str = "quarterly"     # "quarterly" | "static"
    weight_scheme: str = "equal"     # "equal" | "max_sharpe"
    risk_free: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.start >= self.end:
            raise ParameterError(f"start {self.start} must precede end {self.end}")
        if self.initial_capital <= 0:
            raise ParameterError("initial_capital must be positive")
        if self.rebalance not in ("monthly", "none"):
            raise ParameterError(f"rebalance must be 'monthly' or 'none', got {self.rebalance!r}")
        if self.recluster not in ("quarterly", "static", "none"):
            raise ParameterError(
                f"recluster must be 'quarterly', 'static', or 'none', got {self.recluster!r}"
            )
        if self.weight_scheme not in ("equal", "max_sharpe"):
            raise ParameterError(
                f"weight_scheme must be 'equal' or 'max_sharpe', got {self.weight_scheme!r}"
            )


@dataclass(frozen=True)
class EquityCurve:
    """Daily portfolio values plus holdings snapshots at each trade date."""

    strategy_tag: str
    dates: tuple[date, ...]
    values: np.ndarray
    holdings: dict[date, dict[str, float]]

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape != (len(self.dates),) or len(self.dates) == 0:
            raise ParameterError("values must align with a non-empty date list")
        if not np.isfinite(v).all() or (v <= 0).any():
            raise ParameterError("curve values must be positive and finite")

    def daily_returns(self) -> np.ndarray:
        return self.values[1:] / self.values[:-1] - 1.0

    @property
    def final_value(self) -> float:
        return float(self.values[-1])


def _month_start_dates(dates: tuple[date, ...]) -> set[date]:
    return {
        d
        for i, d in enumerate(dates)
        if i == 0 or (d.year, d.month) != (dates[i - 1].year, dates[i - 1].month)
    }


def _sim_indices(rp: ReturnsPanel, cfg: BacktestConfig) -> list[int]:
    idx = [i for i, d in enumerate(rp.dates) if cfg.start <= d < cfg.end]
    if not idx:
        raise EmptyWindowError(f"no trading days in [{cfg.start}, {cfg.end})")
    return idx


def run_rebalance(
    rp: ReturnsPanel,
    cal: TradingCalendar,
    spec: PortfolioSpec,
    weights: WeightVector,
    cfg: BacktestConfig,
) -> EquityCurve:
    """Fixed-universe simulation with periodic rebalancing to target weights.

    Holdings start at ``initial_capital * weights``; every day each
    holding compounds by its return; on each month's first trading day the
    dollar amounts are reset to (total value) x weights.
    """
    if tuple(weights.tickers) != tuple(spec.tickers):
        raise ParameterError("weights must be aligned with the portfolio spec")
    missing = [t for t in spec.tickers if t not in rp.tickers]
    if missing:
        raise DataError(f"portfolio tickers missing from panel: {missing}")
    if not spec.tickers:
        raise ParameterError("cannot simulate an empty portfolio")

    idx = _sim_indices(rp, cfg)
    rows = [rp.ticker_index(t) for t in spec.tickers]
    sub = rp.returns[np.ix_(rows, idx)]
    month_starts = _month_start_dates(rp.dates)

    holdings = cfg.initial_capital * weights.weights.copy()
    snapshots: dict[date, dict[str, float]] = {}
    first = idx[0]
    if first > 0:
        curve_dates = [rp.dates[first - 1]]
        start_t = 0
    else:
        curve_dates = [rp.dates[first]]
        start_t = 1
    values = [cfg.initial_capital]
    snapshots[curve_dates[0]] = dict(zip(spec.tickers, holdings.tolist()))

    for t in range(start_t, len(idx)):
        d = rp.dates[idx[t]]
        holdings = holdings * (1.0 + sub[:, t])
        total = float(holdings.sum())
        if cfg.rebalance == "monthly" and d in month_starts:
            holdings = total * weights.weights
            snapshots[d] = dict(zip(spec.tickers, holdings.tolist()))
        curve_dates.append(d)
        values.append(total)
    return EquityCurve(spec.strategy_tag, tuple(curve_dates), np.array(values), snapshots)


def run_benchmark(rp_index: ReturnsPanel, cfg: BacktestConfig,
                  tag: str = "benchmark") -> EquityCurve:
    """Buy-and-hold compounding of a single index series."""
    if rp_index.n_stocks != 1:
        raise ParameterError("benchmark panel must hold exactly one series")
    idx = _sim_indices(rp_index, cfg)
    series = rp_index.returns[0, idx]
    first = idx[0]
    if first > 0:
        curve_dates = [rp_index.dates[first - 1]]
        growth = np.concatenate([[1.0], np.cumprod(1.0 + series)])
    else:
        curve_dates = [rp_index.dates[first]]
        growth = np.concatenate([[1.0], np.cumprod(1.0 + series[1:])])
    curve_dates += [rp_index.dates[i] for i in idx[(0 if first > 0 else 1):]]
    values = cfg.initial_capital * growth
    ticker = rp_index.tickers[0]
    return EquityCurve(tag, tuple(curve_dates), values,
                       {curve_dates[0]: {ticker: cfg.initial_capital}})


def run_dynamic_clusters(
    rp: ReturnsPanel,
    cal: TradingCalendar,
    method: str,
    cfg: BacktestConfig,
    per_cluster: int = 10,
    tag: str | None = None,
    models: list[tuple[date, "ClusterModel"]] | None = None,
    **cluster_params,
) -> EquityCurve:
    """Quarterly recluster-and-replace simulation at equal dollar weights.

    Each quarter's portfolio (nearest-to-center members, or one stock per
    cluster for the KMeans benchmark) comes from a model trained on the
    previous quarter's returns; the existing portfolio is sold and the new
    one bought, at equal dollar amounts, at the close of the outgoing
    quarter's last trading day. Between quarter trades, holdings rebalance
    to equal weights monthly. A quarter with an empty selection is held in
    cash. ``cfg.recluster == "static"`` reuses the first quarter's model
    (and thus its portfolio) throughout. Precomputed ``models`` (from
    :func:`graphfolio.cluster.quarterly_clusters`) skip the refit.
    """
    static = cfg.recluster == "static"
    if models is None:
        models = quarterly_clusters(rp, cal, method, static=static, **cluster_params)
    usable = [(q, m) for q, m in models if cfg.start <= q < cfg.end]
    if not usable:
        raise InsufficientHistoryError(
            f"no quarter start with a trained model inside [{cfg.start}, {cfg.end})"
        )

    if tag is None:
        tag = f"{method}_static" if static else f"{method}_dynamic"
    date_pos = {d: i for i, d in enumerate(rp.dates)}
    # Trades execute at the close preceding each usable quarter start.
    trades: dict[date, PortfolioSpec] = {}
    for q, model in usable:
        pos = date_pos[q]
        if pos == 0:
            raise InsufficientHistoryError(
                f"no trading day before quarter start {q} to trade on"
            )
        if method == "kmeans":
            spec = select_kmeans_benchmark(model, as_of=q, tag=tag)
        else:
            spec = select_cluster_nearest(model, per_cluster=per_cluster,
                                          as_of=q, tag=tag)
        trades[rp.dates[pos - 1]] = spec

    sim_cfg = replace(cfg, start=usable[0][0])
    idx = _sim_indices(rp, sim_cfg)
    month_starts = _month_start_dates(rp.dates)

    tickers: tuple[str, ...] = ()
    holdings = np.zeros(0)
    rows: list[int] = []
    cash_total = cfg.initial_capital
    snapshots: dict[date, dict[str, float]] = {}

    anchor = rp.dates[idx[0] - 1]
    curve_dates = [anchor]
    values = [cfg.initial_capital]

    def trade(total: float, spec: PortfolioSpec, d: date) -> None:
        nonlocal tickers, holdings, rows, cash_total
        tickers = spec.tickers
        rows = [rp.ticker_index(t) for t in tickers]
        if tickers:
            holdings = np.full(len(tickers), total / len(tickers))
            cash_total = 0.0
        else:
            holdings = np.zeros(0)
            cash_total = total
            warnings.warn(
                f"empty portfolio selected as of {spec.as_of}; holding cash",
                GraphfolioWarning,
            )
        snapshots[d] = dict(zip(tickers, holdings.tolist()))

    trade(cfg.initial_capital, trades[anchor], anchor)

    for t in idx:
        d = rp.dates[t]
        if holdings.size:
            holdings = holdings * (1.0 + rp.returns[rows, t])
        total = float(holdings.sum()) + cash_total
        if d in trades and d != anchor:
            trade(total, trades[d], d)
        elif cfg.rebalance == "monthly" and d in month_starts and holdings.size:
            holdings = np.full(len(tickers), total / len(tickers))
            snapshots[d] = dict(zip(tickers, holdings.tolist()))
        curve_dates.append(d)
        values.append(total)
    return EquityCurve(tag, tuple(curve_dates), np.array(values), snapshots)


def stitch_curves(segments: list[EquityCurve], tag: str) -> EquityCurve:
    """Chain consecutive simulation segments into one curve.

    Each segment after the first must start at the previous segment's
    final date and value (capital carries across segments).
    """
    if not segments:
        raise ParameterError("no segments to stitch")
    dates = list(segments[0].dates)
    values = list(segments[0].values)
    holdings = dict(segments[0].holdings)
    for seg in segments[1:]:
        if seg.dates[0] != dates[-1] or not math.isclose(
            seg.values[0], values[-1], rel_tol=1e-9
        ):
            raise ParameterError("segments do not chain at a shared boundary point")
        dates.extend(seg.dates[1:])
        values.extend(seg.values[1:])
        holdings.update(seg.holdings)
    return EquityCurve(tag, tuple(dates), np.array(values), holdings)


@dataclass(frozen=True)
class YearMetrics:
    year: int
    return_pct: float
    daily_std_pct: float
    sharpe: float


@dataclass(frozen=True)
class PerformanceReport:
    """Per-year and aggregate metrics, all recomputable from the curve."""

    strategy: str
    years: tuple[YearMetrics, ...]
    avg_yearly_return_pct: float
    aggregate_sharpe: float
    daily_std_pct: float
    final_value: float

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "years": [
                {
                    "year": y.year,
                    "return_pct": y.return_pct,
                    "daily_std_pct": y.daily_std_pct,
                    "sharpe": y.sharpe,
                }
                for y in self.years
            ],
            "avg_yearly_return_pct": self.avg_yearly_return_pct,
            "aggregate_sharpe": self.aggregate_sharpe,
        }


def _sharpe(returns: np.ndarray, excess: np.ndarray) -> float:
    """sqrt(252) * mean(excess) / std(returns); 0.0 whenever std is 0.

    A curve that is constant up to float rounding yields stds around
    1e-17, eight-plus orders below any real return series, so stds under
    1e-14 are treated as the zero-std degenerate case.
    """
    if returns.size < 2:
        return 0.0
    std = float(returns.std(ddof=1))
    if std < 1e-14:
        return 0.0
    return SQRT_ANNUAL * float(excess.mean()) / std


def compute_metrics(curve: EquityCurve, risk_free: dict[int, float] | None = None
                    ) -> PerformanceReport:
    """Yearly returns/stds/Sharpes and aggregates from an equity curve.

    Yearly return uses the value entering the year vs the last value in
    the year; Sharpe subtracts that year's risk-free rate (annual, /252
    per day) from daily returns. Missing risk-free years default to 0
    with a warning.
    """
    risk_free = dict(risk_free or {})
    rets = curve.daily_returns()
    ret_dates = curve.dates[1:]
    years = sorted({d.year for d in ret_dates})
    for y in years:
        if y not in risk_free:
            warnings.warn(
                f"no risk-free rate for {y}; assuming 0", GraphfolioWarning
            )
            risk_free[y] = 0.0

    rows = []
    rf_daily = np.array([risk_free[d.year] / TRADING_DAYS_PER_YEAR for d in ret_dates])
    excess_all = rets - rf_daily
    for y in years:
        mask = np.array([d.year == y for d in ret_dates])
        year_rets = rets[mask]
        enter = curve.values[:-1][mask][0] if mask.any() else curve.values[0]
        leave = curve.values[1:][mask][-1]
        year_return = leave / enter - 1.0
        std = float(year_rets.std(ddof=1)) if year_rets.size > 1 else 0.0
        rows.append(
            YearMetrics(
                year=y,
                return_pct=100.0 * float(year_return),
                daily_std_pct=100.0 * std,
                sharpe=_sharpe(year_rets, excess_all[mask]),
            )
        )
    overall_std = float(rets.std(ddof=1)) if rets.size > 1 else 0.0
    return PerformanceReport(
        strategy=curve.strategy_tag,
        years=tuple(rows),
        avg_yearly_return_pct=float(np.mean([r.return_pct for r in rows])),
        aggregate_sharpe=_sharpe(rets, excess_all),
        daily_std_pct=100.0 * overall_std,
        final_value=curve.final_value,
    )
