from __future__ import annotations

import datetime as dt

import numpy as np
import pytest

from clustersharpe import synth
from clustersharpe.market_data import PriceMatrix
from clustersharpe.optimizer import OptimizationProblem

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def random_problem(rng: np.random.Generator, n: int, rf: float = 0.0) -> OptimizationProblem:
    """Daily-scale PSD problem with a mix of positive and negative excess returns."""
    a = rng.normal(size=(n, n + 2))
    vol = rng.uniform(0.008, 0.03, size=n)
    cov = a @ a.T
    d = np.sqrt(np.diag(cov))
    cov = cov / np.outer(d, d) * np.outer(vol, vol)
    mu = rng.normal(0.0005, 0.001, size=n)
    return OptimizationProblem(tuple(f"A{i}" for i in range(n)), mu, cov, rf)


def prices(rows, tickers=("A", "B"), start="2020-01-01") -> PriceMatrix:
    rows = np.asarray(rows, dtype=float)
    dates = np.datetime64(start, "D") + np.arange(len(rows))
    return PriceMatrix(dates, tickers, rows)


PLANTED_HIGH = ("H1", "H2", "H3")
PLANTED_LOW = ("L1", "L2", "L3")
PLANTED_DRIFT_HIGH = 0.0015
PLANTED_DRIFT_LOW = 0.0001
PLANTED_VOL = 0.012


def planted_spec(seed: int = 7) -> synth.SyntheticSpec:
    """Two correlation blocks; the H block has 15x the per-asset drift of the L block."""
    tickers = PLANTED_HIGH + PLANTED_LOW
    corr = synth.block_correlation([[0, 1, 2], [3, 4, 5]], 6, within=0.7, across=0.1)
    drift = [PLANTED_DRIFT_HIGH] * 3 + [PLANTED_DRIFT_LOW] * 3
    n_days = int(np.busday_count(np.datetime64("2010-01-01"), np.datetime64("2024-01-01")))
    return synth.SyntheticSpec(
        tickers=tickers,
        drift=np.array(drift),
        covariance=synth.covariance_from([PLANTED_VOL] * 6, corr),
        start=dt.date(2010, 1, 1),
        n_days=n_days,
        seed=seed,
    )


@pytest.fixture(scope="session")
def demo_prices() -> PriceMatrix:
    from clustersharpe.cli import demo_prices_path
    from clustersharpe.market_data import load_prices_csv

    return load_prices_csv(demo_prices_path())


@pytest.fixture(scope="session")
def planted_prices() -> PriceMatrix:
    return synth.generate_prices(planted_spec())
