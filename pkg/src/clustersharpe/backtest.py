"""Train on one window, trade fixed weights on the next.

Clusters and per-cluster weights come only from training-window log returns.
The test window is scored with simple returns so that compounding is exact.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from . import clustering, market_data, metrics, optimizer
from .errors import ConfigurationError, DataError, DataFormatError, EmptyInputError, stage
from .market_data import PriceMatrix, ReturnMatrix

Rebalance = Literal["daily", "buy_and_hold"]
BenchmarkScope = Literal["all", "per_cluster"]


@dataclass(frozen=True)
class BacktestConfig:
    train_start: dt.date = dt.date(2010, 1, 1)
    train_end: dt.date = dt.date(2020, 1, 1)
    test_start: dt.date = dt.date(2020, 1, 1)
    test_end: dt.date = dt.date(2024, 1, 1)
    k: int = 3
    seed: int = 0
    risk_free_rate: float = 0.0
    trading_days_per_year: int = 252
    feature_kind: clustering.FeatureKind = "correlation_rows"
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-6
    n_init: int = 10
    solver: optimizer.SolverConfig = field(default_factory=optimizer.SolverConfig)
    rebalance: Rebalance = "daily"
    benchmark: BenchmarkScope = "all"
    sharpe_convention: metrics.SharpeConvention = "arithmetic"

    def __post_init__(self) -> None:
        if not (self.train_start < self.train_end <= self.test_start < self.test_end):
            raise ConfigurationError(
                "windows must satisfy train_start < train_end <= test_start < test_end"
            )
        if self.trading_days_per_year <= 0:
            raise ConfigurationError("trading_days_per_year must be positive")
        if self.rebalance not in ("daily", "buy_and_hold"):
            raise ConfigurationError(f"unknown rebalance mode {self.rebalance!r}")
        if self.benchmark not in ("all", "per_cluster"):
            raise ConfigurationError(f"unknown benchmark scope {self.benchmark!r}")
        if self.sharpe_convention not in ("arithmetic", "geometric"):
            raise ConfigurationError(f"unknown Sharpe convention {self.sharpe_convention!r}")
        if self.feature_kind not in ("correlation_rows", "raw_stats"):
            raise ConfigurationError(f"unknown feature kind {self.feature_kind!r}")


@dataclass(frozen=True, eq=False)
class PortfolioTrack:
    label: str
    dates: np.ndarray
    daily_returns: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.dates) == len(self.daily_returns) == len(self.cumulative)):
            raise DataError("track arrays differ in length")
        if np.any(np.asarray(self.cumulative) <= -1):
            raise DataError(f"track {self.label!r} lost all capital")


@dataclass(frozen=True, eq=False)
class BacktestResult:
    cluster_tracks: list[PortfolioTrack]
    benchmark_track: PortfolioTrack
    cluster_weights: list[optimizer.PortfolioWeights]
    best_cluster: int
    reports: dict[str, metrics.PerformanceReport]
    model: clustering.ClusterModel
    members: dict[int, list[str]]
    train_stats: market_data.DescriptiveStats
    solver_results: list[optimizer.SolverResult | None]
    cluster_benchmarks: list[PortfolioTrack] = field(default_factory=list)

    @property
    def tracks(self) -> list[PortfolioTrack]:
        return [*self.cluster_tracks, self.benchmark_track, *self.cluster_benchmarks]


def cluster_label(j: int) -> str:
    return f"cluster_{j}"


def _compound(daily: np.ndarray) -> np.ndarray:
    return np.cumprod(1.0 + daily) - 1.0


def evaluate_track(
    weights: optimizer.PortfolioWeights,
    test_returns: ReturnMatrix,
    label: str,
    rebalance: Rebalance = "daily",
) -> PortfolioTrack:
    """Hold ``weights`` over ``test_returns`` (simple returns).

    ``daily`` re-applies the weights every day; ``buy_and_hold`` sets them once
    and lets positions drift.
    """
    if test_returns.kind != "simple":
        raise ConfigurationError("evaluate_track needs simple returns")
    missing = [t for t in weights.tickers if t not in test_returns.tickers]
    if missing:
        raise ConfigurationError(f"weights reference unknown tickers: {', '.join(missing)}")
    r = test_returns.select(weights.tickers).values
    w = weights.weights
    if rebalance == "daily":
        daily = r @ w
        cumulative = _compound(daily)
    elif rebalance == "buy_and_hold":
        value = np.cumprod(1.0 + r, axis=0) @ w
        prev = np.concatenate([[1.0], value[:-1]])
        daily = value / prev - 1.0
        cumulative = value - 1.0
    else:
        raise ConfigurationError(f"unknown rebalance mode {rebalance!r}")
    return PortfolioTrack(label, test_returns.dates, daily, cumulative)


def make_benchmark(
    test_returns: ReturnMatrix, label: str = "benchmark", rebalance: Rebalance = "daily"
) -> PortfolioTrack:
    w = optimizer.equal_weights(len(test_returns.tickers), test_returns.tickers)
    return evaluate_track(w, test_returns, label, rebalance)


def run_backtest(prices: PriceMatrix, config: BacktestConfig | None = None) -> BacktestResult:
    cfg = config or BacktestConfig()
    with stage("clean"):
        clean = market_data.forward_fill(prices)
    with stage("train"):
        train = market_data.slice_period(
            market_data.log_returns(clean), cfg.train_start, cfg.train_end
        )
        stats = market_data.descriptive_stats(train)
    with stage("cluster"):
        features = clustering.build_features(stats, cfg.feature_kind)
        model = clustering.kmeans_fit(
            features, cfg.k, cfg.seed, cfg.kmeans_max_iter, cfg.kmeans_tol, cfg.n_init
        )
        members = clustering.cluster_members(model, stats.tickers)

    weights: list[optimizer.PortfolioWeights] = []
    solver_results: list[optimizer.SolverResult | None] = []
    with stage("optimize"):
        for j in range(model.k):
            group = members[j]
            if len(group) == 1:
                weights.append(optimizer.PortfolioWeights(tuple(group), np.ones(1)))
                solver_results.append(None)
                continue
            idx = [stats.tickers.index(t) for t in group]
            problem = optimizer.OptimizationProblem(
                tuple(group),
                stats.mean[idx],
                stats.covariance[np.ix_(idx, idx)],
                cfg.risk_free_rate,
            )
            res = optimizer.maximize_sharpe(problem, cfg.solver)
            weights.append(res.weights)
            solver_results.append(res)

    with stage("test"):
        test = market_data.slice_period(
            market_data.simple_returns(clean), cfg.test_start, cfg.test_end
        )
        tracks = [
            evaluate_track(w, test, cluster_label(j), cfg.rebalance) for j, w in enumerate(weights)
        ]
        bench = make_benchmark(test, "benchmark", cfg.rebalance)
        cluster_benchmarks = []
        if cfg.benchmark == "per_cluster":
            cluster_benchmarks = [
                make_benchmark(test.select(members[j]), f"benchmark_{j}", cfg.rebalance)
                for j in range(model.k)
            ]

    with stage("metrics"):
        reports = {
            t.label: metrics.performance_report(
                t, cfg.risk_free_rate, cfg.trading_days_per_year, cfg.sharpe_convention
            )
            for t in [*tracks, bench, *cluster_benchmarks]
        }
    sharpes = [reports[t.label].sharpe_ratio for t in tracks]
    best = int(np.argmax(sharpes))

    return BacktestResult(
        cluster_tracks=tracks,
        benchmark_track=bench,
        cluster_weights=weights,
        best_cluster=best,
        reports=reports,
        model=model,
        members=members,
        train_stats=stats,
        solver_results=solver_results,
        cluster_benchmarks=cluster_benchmarks,
    )


def write_tracks_csv(tracks: Sequence[PortfolioTrack], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "label", "cumulative"])
        for track in tracks:
            for d, c in zip(track.dates, track.cumulative):
                w.writerow([str(d), track.label, repr(float(c))])


def read_tracks_csv(path: str | Path) -> list[PortfolioTrack]:
    """Rebuild tracks from a cumulative series file; daily returns are implied ratios."""
    series: dict[str, tuple[list, list]] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["date", "label", "cumulative"]:
            raise DataFormatError(f"{path}: expected header date,label,cumulative")
        for row in reader:
            dates, values = series.setdefault(row["label"], ([], []))
            dates.append(row["date"])
            values.append(float(row["cumulative"]))
    if not series:
        raise EmptyInputError(f"{path}: no track rows")
    tracks = []
    for label, (dates, values) in series.items():
        cum = np.array(values)
        growth = 1.0 + cum
        daily = growth / np.concatenate([[1.0], growth[:-1]]) - 1.0
        tracks.append(PortfolioTrack(label, np.array(dates, dtype="datetime64[D]"), daily, cum))
    return tracks
