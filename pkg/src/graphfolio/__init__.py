"""graphfolio: latent-space models, sparse dependency graphs, and dynamic
clustering for stock portfolio selection and backtesting."""

__version__ = "0.1.0"

from .allocation import MomentEstimate, WeightVector, equal_weights, estimate_moments, max_sharpe
from .backtest import (
    BacktestConfig,
    EquityCurve,
    PerformanceReport,
    compute_metrics,
    run_benchmark,
    run_dynamic_clusters,
    run_rebalance,
)
from .cluster import (
    AffinityPropagation,
    ClusterModel,
    KMeans,
    WardAgglomerative,
    cluster_window,
    quarterly_clusters,
)
from .graph import (
    GraphicalLasso,
    PrecisionGraph,
    SpectralEmbedding,
    edges_from_precision,
    fit_precision_graph,
    graphical_lasso,
)
from .latent import ReconstructionReport, ReturnsPCA, aggregate_selections, select_extreme
from .market_data import (
    PricePanel,
    ReturnsPanel,
    TradingCalendar,
    compute_returns,
    load_prices,
    load_sectors,
    slice_window,
    synth_returns,
)
from .selection import (
    PortfolioSpec,
    select_avgret_over_vol,
    select_cluster_nearest,
    select_kmeans_benchmark,
    select_model_extreme,
    select_vol,
)
from .vae import VariationalAutoencoder

__all__ = [
    "AffinityPropagation",
    "BacktestConfig",
    "ClusterModel",
    "EquityCurve",
    "GraphicalLasso",
    "KMeans",
    "MomentEstimate",
    "PerformanceReport",
    "PortfolioSpec",
    "PricePanel",
    "PrecisionGraph",
    "ReconstructionReport",
    "ReturnsPCA",
    "ReturnsPanel",
    "SpectralEmbedding",
    "TradingCalendar",
    "VariationalAutoencoder",
    "WardAgglomerative",
    "WeightVector",
    "aggregate_selections",
    "cluster_window",
    "compute_metrics",
    "compute_returns",
    "edges_from_precision",
    "equal_weights",
    "estimate_moments",
    "fit_precision_graph",
    "graphical_lasso",
    "load_prices",
    "load_sectors",
    "max_sharpe",
    "quarterly_clusters",
    "run_benchmark",
    "run_dynamic_clusters",
    "run_rebalance",
    "select_avgret_over_vol",
    "select_cluster_nearest",
    "select_extreme",
    "select_kmeans_benchmark",
    "select_model_extreme",
    "select_vol",
    "slice_window",
    "synth_returns",
]
