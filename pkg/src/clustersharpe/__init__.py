"""Cluster assets by return correlation, weight each cluster for maximum Sharpe ratio, backtest."""

from .backtest import BacktestConfig, BacktestResult, PortfolioTrack, evaluate_track, make_benchmark, run_backtest
from .clustering import ClusterModel, FeatureMatrix, build_features, cluster_members, kmeans_fit
from .market_data import (
    DescriptiveStats,
    PriceMatrix,
    ReturnMatrix,
    descriptive_stats,
    forward_fill,
    load_prices_csv,
    log_returns,
    simple_returns,
    slice_period,
)
from .metrics import PerformanceReport, performance_report
from .optimizer import (
    OptimizationProblem,
    PortfolioWeights,
    SolverConfig,
    equal_weights,
    grid_oracle,
    maximize_sharpe,
    sharpe_gradient,
    sharpe_ratio,
)

__version__ = "0.1.0"
