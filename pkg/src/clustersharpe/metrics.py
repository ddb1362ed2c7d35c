"""Performance metrics for a daily portfolio track."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Literal, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, ZeroVarianceError

if TYPE_CHECKING:
    from .backtest import PortfolioTrack

SharpeConvention = Literal["arithmetic", "geometric"]

TRADING_DAYS = 252
SUMMARY_COLUMNS = (
    "portfolio",
    "total_return_pct",
    "annualized_return_pct",
    "volatility_pct",
    "sharpe_ratio",
)


@dataclass(frozen=True)
class PerformanceReport:
    total_return: float
    annualized_return: float
    annualized_volatility: float
    sharpe_ratio: float
    n_days: int
    years: float


def _returns(track: "PortfolioTrack") -> np.ndarray:
    r = np.asarray(track.daily_returns, dtype=float)
    if r.size == 0:
        raise InsufficientDataError(f"track {track.label!r} is empty")
    return r


def total_return(track: "PortfolioTrack") -> float:
    _returns(track)
    return float(track.cumulative[-1])


def annualize_total_return(total: float, years: float) -> float:
    """Geometric annualization ``(1 + total) ** (1 / years) - 1``."""
    if total <= -1:
        raise DomainError(f"total return {total} is at or below -100%")
    if not years > 0:
        raise DomainError("years must be positive")
    return (1.0 + total) ** (1.0 / years) - 1.0


def annualized_return(track: "PortfolioTrack", trading_days_per_year: int = TRADING_DAYS) -> float:
    r = _returns(track)
    return annualize_total_return(total_return(track), r.size / trading_days_per_year)


def _daily_std(r: np.ndarray) -> float:
    if r.size < 2:
        raise InsufficientDataError("need at least 2 daily returns for volatility")
    if np.all(r == r[0]):
        return 0.0
    return float(np.std(r, ddof=1))


def annualized_volatility(track: "PortfolioTrack", trading_days_per_year: int = TRADING_DAYS) -> float:
    return _daily_std(_returns(track)) * math.sqrt(trading_days_per_year)


def annualized_sharpe(
    track: "PortfolioTrack",
    risk_free_rate: float = 0.0,
    trading_days_per_year: int = TRADING_DAYS,
    convention: SharpeConvention = "arithmetic",
) -> float:
    """Annualized Sharpe ratio.

    ``arithmetic`` scales the mean daily excess return by the day count and the
    daily std by its square root. ``geometric`` divides the geometric annualized
    return, less the annualized risk-free rate, by annualized volatility.
    """
    r = _returns(track)
    std = _daily_std(r)
    if not std > 0:
        raise ZeroVarianceError(f"track {track.label!r} has zero volatility")
    if convention == "arithmetic":
        return (float(r.mean()) - risk_free_rate) * trading_days_per_year / (
            std * math.sqrt(trading_days_per_year)
        )
    if convention == "geometric":
        excess = annualized_return(track, trading_days_per_year) - risk_free_rate * trading_days_per_year
        return excess / (std * math.sqrt(trading_days_per_year))
    raise ValueError(f"unknown Sharpe convention {convention!r}")


def performance_report(
    track: "PortfolioTrack",
    risk_free_rate: float = 0.0,
    trading_days_per_year: int = TRADING_DAYS,
    convention: SharpeConvention = "arithmetic",
) -> PerformanceReport:
    n = _returns(track).size
    return PerformanceReport(
        total_return=total_return(track),
        annualized_return=annualized_return(track, trading_days_per_year),
        annualized_volatility=annualized_volatility(track, trading_days_per_year),
        sharpe_ratio=annualized_sharpe(track, risk_free_rate, trading_days_per_year, convention),
        n_days=n,
        years=n / trading_days_per_year,
    )


def summary_rows(labels: Sequence[str], reports: Sequence[PerformanceReport]) -> list[list[str]]:
    rows = []
    for label, rep in zip(labels, reports):
        rows.append(
            [
                label,
                f"{rep.total_return * 100:.2f}",
                f"{rep.annualized_return * 100:.2f}",
                f"{rep.annualized_volatility * 100:.2f}",
                f"{rep.sharpe_ratio:.2f}",
            ]
        )
    return rows


def write_summary_csv(labels: Sequence[str], reports: Sequence[PerformanceReport], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(summary_rows(labels, reports))
