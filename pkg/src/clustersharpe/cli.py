"""``clustersharpe`` command line.

Exit codes: 0 success, 1 pipeline failure, 2 usage or configuration error.
Failures print one line to stderr: ``ERROR <stage>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import backtest, charts, clustering, market_data, metrics, optimizer, synth
from .config import build_run_config, load_kv, run_config_to_kv, synthetic_spec_from_kv
from .errors import ClusterSharpeError, ConfigurationError, PreconditionError

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class CommandError(Exception):
    def __init__(self, stage: str, message: str, code: int = EXIT_FAILURE):
        super().__init__(message)
        self.stage = stage
        self.code = code


def demo_prices_path() -> Path:
    return Path(str(resources.files("clustersharpe") / "data" / "demo_prices.csv"))


def _input_path(value: str | None) -> Path:
    path = Path(value) if value else demo_prices_path()
    if not path.is_file():
        raise CommandError("input", f"input not found: {path}", EXIT_USAGE)
    return path


def _out_dir(value: str) -> Path:
    path = Path(value)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _returns_window(prices_path: Path, start, end, kind: str = "log") -> market_data.ReturnMatrix:
    prices = market_data.forward_fill(market_data.load_prices_csv(prices_path))
    returns = market_data.log_returns(prices) if kind == "log" else market_data.simple_returns(prices)
    if start is None and end is None:
        return returns
    lo = start or returns.dates[0]
    hi = end or returns.dates[-1] + np.timedelta64(1, "D")
    return market_data.slice_period(returns, lo, hi)


def write_clusters_csv(tickers: Sequence[str], assignments: Sequence[int], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "cluster"])
        for t, a in zip(tickers, assignments):
            w.writerow([t, int(a)])


def read_clusters_csv(path: Path) -> dict[int, list[str]]:
    groups: dict[int, list[str]] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["ticker", "cluster"]:
            raise CommandError("input", f"{path}: expected header ticker,cluster", EXIT_USAGE)
        for row in reader:
            groups.setdefault(int(row["cluster"]), []).append(row["ticker"])
    return dict(sorted(groups.items()))


def write_weights_csv(weights: optimizer.PortfolioWeights, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "weight"])
        for t, x in zip(weights.tickers, weights.weights):
            w.writerow([t, f"{x:.4f}"])


# -- commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.demo:
        spec = synth.demo_spec() if args.seed is None else synth.demo_spec(args.seed)
    else:
        if not args.spec:
            raise CommandError("synth", "either --spec or --demo is required", EXIT_USAGE)
        spec_path = Path(args.spec)
        values = load_kv(spec_path)
        if args.seed is not None:
            values["seed"] = str(args.seed)
        spec = synthetic_spec_from_kv(values, spec_path.parent)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    market_data.write_prices_csv(synth.generate_prices(spec), output)
    return EXIT_OK


def cmd_stats(args) -> int:
    returns = _returns_window(_input_path(args.input), args.start, args.end, args.kind)
    stats = market_data.descriptive_stats(returns)
    out = _out_dir(args.output)
    market_data.write_stats_csv(stats, out / "stats.csv")
    market_data.write_matrix_csv(stats.tickers, stats.correlation, out / "correlation.csv")
    market_data.write_matrix_csv(stats.tickers, stats.covariance, out / "covariance.csv")
    return EXIT_OK


def cmd_cluster(args) -> int:
    returns = _returns_window(_input_path(args.input), args.start, args.end)
    stats = market_data.descriptive_stats(returns)
    features = clustering.build_features(stats, args.feature_kind)
    model = clustering.kmeans_fit(features, args.k, args.seed, args.kmeans_max_iter, args.kmeans_tol, args.n_init)
    out = _out_dir(args.output)
    write_clusters_csv(stats.tickers, model.assignments, out / "clusters.csv")
    _write_json({**model.to_dict(), "tickers": list(stats.tickers), "feature_kind": args.feature_kind},
                out / "cluster_model.json")
    return EXIT_OK


def cmd_optimize(args) -> int:
    returns = _returns_window(_input_path(args.input), args.start, args.end)
    stats = market_data.descriptive_stats(returns)
    if args.clusters:
        groups = read_clusters_csv(_input_path(args.clusters))
    else:
        groups = {0: list(stats.tickers)}
    cfg = optimizer.SolverConfig(max_iter=args.max_iter, tol=args.tol)
    out = _out_dir(args.output)
    report = {}
    for j, group in groups.items():
        unknown = [t for t in group if t not in stats.tickers]
        if unknown:
            raise CommandError("optimize", f"unknown tickers in clusters file: {', '.join(unknown)}", EXIT_USAGE)
        idx = [stats.tickers.index(t) for t in group]
        problem = optimizer.OptimizationProblem(
            tuple(group), stats.mean[idx], stats.covariance[np.ix_(idx, idx)], args.risk_free_rate
        )
        result = optimizer.maximize_sharpe(problem, cfg)
        write_weights_csv(result.weights, out / f"weights_{backtest.cluster_label(j)}.csv")
        report[backtest.cluster_label(j)] = result.diagnostics()
    _write_json(report, out / "optimize.json")
    return EXIT_OK


def cmd_report(args) -> int:
    path = _input_path(args.input)
    tracks = backtest.read_tracks_csv(path)
    reports = [
        metrics.performance_report(t, args.risk_free_rate, args.trading_days_per_year, args.sharpe_convention)
        for t in tracks
    ]
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    metrics.write_summary_csv([t.label for t in tracks], reports, output)
    return EXIT_OK


def write_backtest_outputs(result: backtest.BacktestResult, out: Path, with_charts: bool) -> None:
    tickers = result.train_stats.tickers
    write_clusters_csv(tickers, result.model.assignments, out / "clusters.csv")
    for j, w in enumerate(result.cluster_weights):
        write_weights_csv(w, out / f"weights_{backtest.cluster_label(j)}.csv")
    backtest.write_tracks_csv(result.tracks, out / "tracks.csv")
    labels = [t.label for t in result.tracks]
    metrics.write_summary_csv(labels, [result.reports[x] for x in labels], out / "summary.csv")
    summary = {
        "best_cluster": result.best_cluster,
        "members": {backtest.cluster_label(j): m for j, m in result.members.items()},
        "cluster_model": {**result.model.to_dict(), "tickers": list(tickers)},
        "solver": {
            backtest.cluster_label(j): (r.diagnostics() if r is not None else {"single_asset": True})
            for j, r in enumerate(result.solver_results)
        },
        "reports": {
            label: {
                "total_return": r.total_return,
                "annualized_return": r.annualized_return,
                "annualized_volatility": r.annualized_volatility,
                "sharpe_ratio": r.sharpe_ratio,
                "n_days": r.n_days,
                "years": r.years,
            }
            for label, r in result.reports.items()
        },
    }
    _write_json(summary, out / "report.json")
    if with_charts:
        charts.emit_charts(result, result.train_stats, out)


def cmd_backtest(args) -> int:
    file_values = load_kv(args.config) if args.config else {}
    overrides = {k: getattr(args, k, None) for k in (
        "input", "output", "charts", "train_start", "train_end", "test_start", "test_end", "k", "seed",
        "risk_free_rate", "trading_days_per_year", "feature_kind", "kmeans_max_iter", "kmeans_tol",
        "n_init", "rebalance", "benchmark", "sharpe_convention", "max_iter", "tol",
    )}
    run = build_run_config(file_values, overrides)
    prices = market_data.load_prices_csv(_input_path(run.input))
    n_tickers = len(prices.tickers)
    if run.backtest.k > n_tickers:
        raise CommandError("cluster", f"k={run.backtest.k} exceeds the number of tickers ({n_tickers})", EXIT_USAGE)
    result = backtest.run_backtest(prices, run.backtest)
    out = _out_dir(run.output)
    write_backtest_outputs(result, out, run.charts)
    effective = run_config_to_kv(run)
    (out / "run.cfg").write_text("".join(f"{k} = {v}\n" for k, v in effective.items() if k != "input"))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _add_window(p: argparse.ArgumentParser) -> None:
    p.add_argument("--start", help="first date to include (ISO-8601)")
    p.add_argument("--end", help="first date to exclude (ISO-8601)")


def _add_kmeans(p: argparse.ArgumentParser, defaults: bool) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("-k", "--k", type=int, default=d(3), help="number of clusters")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--feature-kind", dest="feature_kind", choices=["correlation_rows", "raw_stats"], default=d("correlation_rows"))
    p.add_argument("--kmeans-max-iter", dest="kmeans_max_iter", type=int, default=d(300))
    p.add_argument("--kmeans-tol", dest="kmeans_tol", type=float, default=d(1e-6))
    p.add_argument("--n-init", dest="n_init", type=int, default=d(10))


def _add_solver(p: argparse.ArgumentParser, defaults: bool) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--risk-free-rate", dest="risk_free_rate", type=float, default=d(0.0), help="per-day rate")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=d(1000))
    p.add_argument("--tol", type=float, default=d(1e-10))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustersharpe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded GBM price CSV")
    p.add_argument("--spec", help="key-value synthetic spec file")
    p.add_argument("--demo", action="store_true", help="use the bundled 10-ticker demo spec")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", required=True, help="price CSV to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="descriptive statistics of returns")
    p.add_argument("input", nargs="?", help="price CSV (default: bundled demo)")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--kind", choices=["log", "simple"], default="log")
    _add_window(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("cluster", help="K-Means clustering of tickers")
    p.add_argument("input", nargs="?")
    p.add_argument("-o", "--output", required=True)
    _add_window(p)
    _add_kmeans(p, defaults=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("optimize", help="max-Sharpe weights per cluster")
    p.add_argument("input", nargs="?")
    p.add_argument("--clusters", help="clusters.csv from the cluster command")
    p.add_argument("-o", "--output", required=True)
    _add_window(p)
    _add_solver(p, defaults=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("backtest", help="full train/optimize/test pipeline")
    p.add_argument("input", nargs="?")
    p.add_argument("-c", "--config", help="key-value config file")
    p.add_argument("-o", "--output")
    for name in ("train_start", "train_end", "test_start", "test_end"):
        p.add_argument("--" + name.replace("_", "-"), dest=name)
    _add_kmeans(p, defaults=False)
    _add_solver(p, defaults=False)
    p.add_argument("--trading-days-per-year", dest="trading_days_per_year", type=int)
    p.add_argument("--rebalance", choices=["daily", "buy_and_hold"])
    p.add_argument("--benchmark", choices=["all", "per_cluster"])
    p.add_argument("--sharpe-convention", dest="sharpe_convention", choices=["arithmetic", "geometric"])
    p.add_argument("--charts", dest="charts", action="store_const", const=True)
    p.add_argument("--no-charts", dest="charts", action="store_const", const=False)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("report", help="performance summary CSV from a tracks CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="summary CSV to write")
    p.add_argument("--risk-free-rate", dest="risk_free_rate", type=float, default=0.0)
    p.add_argument("--trading-days-per-year", dest="trading_days_per_year", type=int, default=252)
    p.add_argument("--sharpe-convention", dest="sharpe_convention", choices=["arithmetic", "geometric"], default="arithmetic")
    p.set_defaults(func=cmd_report)
    return parser


def _oneline(msg: str) -> str:
    return " ".join(str(msg).split())


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"ERROR {exc.stage}: {_oneline(exc)}", file=sys.stderr)
        return exc.code
    except (ConfigurationError, PreconditionError) as exc:
        print(f"ERROR {exc.stage or 'config'}: {_oneline(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except ClusterSharpeError as exc:
        print(f"ERROR {exc.stage or args.command}: {_oneline(exc)}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        print(f"ERROR {args.command}: {_oneline(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ERROR io: {_oneline(exc)}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
