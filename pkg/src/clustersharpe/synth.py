"""Seeded geometric Brownian motion price paths on a business-day calendar."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .market_data import PriceMatrix


@dataclass(frozen=True, eq=False)
class SyntheticSpec:
    tickers: tuple[str, ...]
    drift: np.ndarray
    covariance: np.ndarray
    start: dt.date = dt.date(2010, 1, 1)
    n_days: int = 252
    seed: int = 0
    start_price: float = 100.0

    def __post_init__(self) -> None:
        n = len(self.tickers)
        drift = np.asarray(self.drift, dtype=float).reshape(-1)
        cov = np.asarray(self.covariance, dtype=float)
        if n == 0 or drift.shape != (n,) or cov.shape != (n, n):
            raise PreconditionError("drift/covariance dimensions do not match tickers")
        if self.n_days < 2:
            raise PreconditionError("n_days must be at least 2")
        if not self.start_price > 0:
            raise PreconditionError("start_price must be positive")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-15):
            raise PreconditionError("covariance is not symmetric")
        if n and np.linalg.eigvalsh(cov)[0] < -1e-10:
            raise PreconditionError("covariance is not positive semi-definite")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "covariance", (cov + cov.T) / 2)


def covariance_from(vol: Sequence[float], corr: np.ndarray) -> np.ndarray:
    vol = np.asarray(vol, dtype=float)
    return np.asarray(corr, dtype=float) * np.outer(vol, vol)


def block_correlation(groups: Sequence[Sequence[int]], n: int, within: float, across: float) -> np.ndarray:
    corr = np.full((n, n), across)
    for g in groups:
        corr[np.ix_(g, g)] = within
    np.fill_diagonal(corr, 1.0)
    return corr


def business_days(start: dt.date, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def generate_prices(spec: SyntheticSpec) -> PriceMatrix:
    """``P[t+1] = P[t] * exp(r[t])`` with ``r ~ N(drift, covariance)``."""
    rng = np.random.default_rng(spec.seed)
    vals, vecs = np.linalg.eigh(spec.covariance)
    factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    z = rng.standard_normal((spec.n_days - 1, len(spec.tickers)))
    log_ret = spec.drift + z @ factor.T
    path = np.vstack([np.zeros(len(spec.tickers)), np.cumsum(log_ret, axis=0)])
    prices = spec.start_price * np.exp(path)
    # 12 significant digits keep the CSV compact and the reload exact
    prices = np.array([[float(f"{p:.12g}") for p in row] for row in prices])
    return PriceMatrix(business_days(spec.start, spec.n_days), spec.tickers, prices)


DEMO_TICKERS = ("AAPL", "AMZN", "GOOGL", "JPM", "META", "MSFT", "NVDA", "TSLA", "UNH", "V")
DEMO_MEAN = (0.0009, 0.0009, 0.0008, 0.0007, 0.0008, 0.0009, 0.0018, 0.0017, 0.0008, 0.0008)
DEMO_STD = (0.0179, 0.0203, 0.0170, 0.0166, 0.0253, 0.0168, 0.0276, 0.0354, 0.0157, 0.0153)
DEMO_GROUPS = (("AMZN", "V"), ("AAPL", "NVDA", "META", "UNH"), ("MSFT", "GOOGL", "TSLA", "JPM"))


def demo_spec(seed: int = 2010) -> SyntheticSpec:
    """Ten tickers shaped after large-cap US equities on a 2010-2023 calendar.

    Daily drift and volatility follow the usual log-return magnitudes of those
    names; correlation is block-structured in three groups.
    """
    groups = [[DEMO_TICKERS.index(t) for t in g] for g in DEMO_GROUPS]
    corr = block_correlation(groups, len(DEMO_TICKERS), within=0.6, across=0.25)
    n_days = int(np.busday_count(np.datetime64("2010-01-01"), np.datetime64("2024-01-01")))
    return SyntheticSpec(
        tickers=DEMO_TICKERS,
        drift=np.array(DEMO_MEAN),
        covariance=covariance_from(DEMO_STD, corr),
        start=dt.date(2010, 1, 1),
        n_days=n_days,
        seed=seed,
    )
