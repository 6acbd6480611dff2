"""Strategy orchestration: yearly model-based portfolios and quarterly
cluster portfolios wired into backtests.

Yearly strategies (PCA/VAE reconstruction extremes, volatility,
avg-return-over-volatility) retrain on the calendar year prior to each
simulated year, select a fresh portfolio, weight it (equal or max-Sharpe
from prior-year moments), and simulate the year with monthly rebalancing;
capital carries across years. Cluster strategies delegate to
:func:`graphfolio.backtest.run_dynamic_clusters`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from datetime import date

from .allocation import equal_weights, estimate_moments, max_sharpe
from .backtest import BacktestConfig, EquityCurve, run_rebalance, stitch_curves
from .errors import (
    GraphfolioWarning,
    InfeasibleTangencyError,
    InsufficientHistoryError,
    ParameterError,
)
from .latent import ReturnsPCA, aggregate_selections, select_extreme
from .market_data import ReturnsPanel, TradingCalendar, slice_window
from .selection import (
    PortfolioSpec,
    select_avgret_over_vol,
    select_model_extreme,
    select_vol,
)
from .vae import train_repeated

YEARLY_STRATEGIES = (
    "pca_max", "pca_min",
    "vae_normal_max", "vae_normal_min",
    "vae_cauchy_max", "vae_cauchy_min",
    "vol_max", "vol_min",
    "avgretvol_max", "avgretvol_min",
)
CLUSTER_STRATEGIES = ("affinity", "ward", "kmeans_static", "kmeans_dynamic")
ALL_STRATEGIES = YEARLY_STRATEGIES + CLUSTER_STRATEGIES + ("benchmark",)


@dataclass(frozen=True)
class StrategyParams:
    """Per-strategy knobs with the defaults used across the package."""

    n_select: int = 10
    pca_components: int = 3
    vae_epochs: int = 300
    vae_learning_rate: float = 1e-3
    vae_hidden_units: int = 100
    vae_repeats: int = 10
    n_clusters_kmeans: int = 10
    n_clusters_ward: int = 15
    damping: float = 0.5
    preference: float | None = None
    per_cluster: int = 10
    glasso_alpha: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class StrategyResult:
    curve: EquityCurve
    portfolios: tuple[PortfolioSpec, ...]
    weight_rows: tuple[tuple[date, str, dict[str, float]], ...] = ()


def _select_for_year(tag: str, train: ReturnsPanel, as_of: date,
                     params: StrategyParams) -> PortfolioSpec:
    n = params.n_select
    if tag in ("vol_max", "vol_min"):
        return select_vol(train, tag.rsplit("_", 1)[1], n, as_of=as_of)
    if tag in ("avgretvol_max", "avgretvol_min"):
        return select_avgret_over_vol(train, tag.rsplit("_", 1)[1], n, as_of=as_of)
    if tag in ("pca_max", "pca_min"):
        model = ReturnsPCA(n_components=params.pca_components).fit(train.returns)
        report = model.reconstruction_report(train)
        return select_model_extreme(report, tag.rsplit("_", 1)[1], n,
                                    tag="pca", as_of=as_of)
    if tag.startswith("vae_"):
        _, likelihood, direction = tag.split("_")
        models = train_repeated(
            train, likelihood,
            n_repeats=params.vae_repeats,
            base_seed=params.seed,
            epochs=params.vae_epochs,
            learning_rate=params.vae_learning_rate,
            hidden_units=params.vae_hidden_units,
        )
        runs = [
            select_extreme(m.reconstruction_report(train), direction, n)
            for m in models
        ]
        picked = aggregate_selections(runs, n)
        return PortfolioSpec(as_of, tuple(picked), tag)
    raise ParameterError(f"unknown yearly strategy {tag!r}")


def run_yearly_strategy(
    rp: ReturnsPanel,
    cal: TradingCalendar,
    tag: str,
    cfg: BacktestConfig,
    params: StrategyParams | None = None,
) -> StrategyResult:
    """Backtest a retrain-annually strategy over ``cfg``'s range."""
    params = params or StrategyParams()
    sim_years = [
        y for y in cal.years
        if cfg.start <= cal.dates[cal.year_windows[y][0]] < cfg.end
        and y - 1 in cal.year_windows
    ]
    sim_years = [y for y in sim_years if y > min(cal.years)]
    if not sim_years:
        raise InsufficientHistoryError(
            "no simulated year has a full prior training year in the panel"
        )

    segments: list[EquityCurve] = []
    portfolios: list[PortfolioSpec] = []
    weight_rows: list[tuple[date, str, dict[str, float]]] = []
    capital = cfg.initial_capital
    for y in sim_years:
        train = slice_window(rp, date(y - 1, 1, 1), date(y, 1, 1))
        lo, hi = cal.year_windows[y]
        year_start = cal.dates[lo]
        spec = _select_for_year(tag, train, year_start, params)
        portfolios.append(spec)

        if cfg.weight_scheme == "max_sharpe":
            rf = cfg.risk_free.get(y, 0.0)
            try:
                weights = max_sharpe(estimate_moments(train, spec.tickers), rf)
            except InfeasibleTangencyError:
                warnings.warn(
                    f"{tag} {y}: max-Sharpe infeasible (no asset beats rf={rf}); "
                    "falling back to equal weights",
                    GraphfolioWarning,
                )
                weights = equal_weights(spec.tickers)
        else:
            weights = equal_weights(spec.tickers)
        weight_rows.append((year_start, tag, weights.as_dict()))

        year_cfg = replace(
            cfg,
            start=max(cfg.start, year_start),
            end=min(cfg.end, date(y + 1, 1, 1)),
            initial_capital=capital,
        )
        segments.append(run_rebalance(rp, cal, spec, weights, year_cfg))
        capital = segments[-1].final_value
    curve = stitch_curves(segments, tag)
    return StrategyResult(curve, tuple(portfolios), tuple(weight_rows))


def equal_weight_index(rp: ReturnsPanel, name: str = "EWINDEX") -> ReturnsPanel:
    """Single-series panel of the equal-weighted average daily return."""
    mean = rp.returns.mean(axis=0, keepdims=True)
    return ReturnsPanel((name,), rp.dates, mean)
