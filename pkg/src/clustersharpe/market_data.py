"""Price ingestion, cleaning, returns and summary statistics.

Prices live in a wide CSV: a ``date`` column (ISO-8601) followed by one column
per ticker. Empty cells are missing observations and are carried as NaN until
:func:`forward_fill` removes them.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .errors import (
    DataError,
    DataFormatError,
    EmptyInputError,
    InsufficientDataError,
    PreconditionError,
)

ReturnKind = Literal["log", "simple"]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _as_dates(dates: Sequence) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


def _as_day(value) -> np.datetime64:
    return np.datetime64(value, "D")


@dataclass(frozen=True, eq=False)
class PriceMatrix:
    dates: np.ndarray
    tickers: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        tickers = tuple(self.tickers)
        if values.ndim != 2 or values.shape != (len(dates), len(tickers)):
            raise DataFormatError(
                f"price matrix shape {values.shape} does not match "
                f"{len(dates)} dates x {len(tickers)} tickers"
            )
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataFormatError("dates must be strictly increasing")
        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "values", _frozen(values))

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def column(self, ticker: str) -> np.ndarray:
        return self.values[:, self.tickers.index(ticker)]

    def equals(self, other: "PriceMatrix") -> bool:
        return (
            self.tickers == other.tickers
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True, eq=False)
class ReturnMatrix:
    dates: np.ndarray
    tickers: tuple[str, ...]
    values: np.ndarray
    kind: ReturnKind = "log"

    def __post_init__(self) -> None:
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(dates), len(self.tickers)):
            raise DataFormatError("return matrix shape does not match dates x tickers")
        if not np.all(np.isfinite(values)):
            raise DataError("returns must be finite")
        if self.kind not in ("log", "simple"):
            raise PreconditionError(f"unknown return kind {self.kind!r}")
        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "values", _frozen(values))

    def select(self, tickers: Sequence[str]) -> "ReturnMatrix":
        idx = [self.tickers.index(t) for t in tickers]
        return ReturnMatrix(self.dates, tuple(tickers), self.values[:, idx], self.kind)


@dataclass(frozen=True, eq=False)
class DescriptiveStats:
    tickers: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    correlation: np.ndarray
    covariance: np.ndarray
    n_obs: int


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a wide price CSV."""

    date_column: str = "date"
    missing: str = ""


def load_prices_csv(path: str | Path, schema: CsvSchema | None = None) -> PriceMatrix:
    """Read a wide price CSV; rows come back sorted by date with gaps as NaN."""
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise EmptyInputError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not header or header[0].strip() != schema.date_column:
        raise DataFormatError(f"{path}: first column must be {schema.date_column!r}")
    tickers = tuple(h.strip() for h in header[1:])
    if not tickers or not body:
        raise EmptyInputError(f"{path}: no tickers or no rows")
    if len(set(tickers)) != len(tickers):
        raise DataFormatError(f"{path}: duplicate ticker columns")

    dates: list[dt.date] = []
    values = np.full((len(body), len(tickers)), np.nan)
    for r, row in enumerate(body, start=2):
        if len(row) != len(tickers) + 1:
            raise DataFormatError(f"{path}:{r}: expected {len(tickers) + 1} fields, got {len(row)}")
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise DataFormatError(f"{path}:{r}: bad date {row[0]!r}") from None
        for c, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == schema.missing:
                continue
            try:
                price = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}:{r}: non-numeric price {cell!r}") from None
            if not math.isfinite(price) or price <= 0:
                raise DataError(f"{path}:{r}: price for {tickers[c]} must be positive, got {cell}")
            values[r - 2, c] = price

    date_arr = _as_dates(dates)
    order = np.argsort(date_arr, kind="stable")
    date_arr = date_arr[order]
    if len(date_arr) > 1 and np.any(date_arr[1:] == date_arr[:-1]):
        dup = date_arr[1:][date_arr[1:] == date_arr[:-1]][0]
        raise DataFormatError(f"{path}: duplicate date {dup}")
    return PriceMatrix(date_arr, tickers, values[order])


def _format_float(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_prices_csv(prices: PriceMatrix, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *prices.tickers])
        for d, row in zip(prices.dates, prices.values):
            w.writerow([str(d), *(_format_float(x) for x in row)])


def forward_fill(prices: PriceMatrix) -> PriceMatrix:
    """Carry the last observation forward; drop leading rows that stay incomplete."""
    values = np.array(prices.values, copy=True)
    observed = ~np.isnan(values)
    for c, ticker in enumerate(prices.tickers):
        if not observed[:, c].any():
            raise DataError(f"ticker {ticker} has no observed prices")
    n = len(values)
    # index of the most recent observed row, per column
    last = np.where(observed, np.arange(n)[:, None], -1)
    np.maximum.accumulate(last, axis=0, out=last)
    filled = np.where(last >= 0, values[np.maximum(last, 0), np.arange(values.shape[1])], np.nan)
    keep = ~np.isnan(filled).any(axis=1)
    return PriceMatrix(prices.dates[keep], prices.tickers, filled[keep])


def _check_clean(prices: PriceMatrix) -> None:
    if prices.has_missing:
        raise PreconditionError("prices contain missing cells; run forward_fill first")
    if len(prices.dates) < 2:
        raise InsufficientDataError("need at least 2 price rows to form returns")


def log_returns(prices: PriceMatrix) -> ReturnMatrix:
    _check_clean(prices)
    v = prices.values
    return ReturnMatrix(prices.dates[1:], prices.tickers, np.log(v[1:] / v[:-1]), "log")


def simple_returns(prices: PriceMatrix) -> ReturnMatrix:
    _check_clean(prices)
    v = prices.values
    return ReturnMatrix(prices.dates[1:], prices.tickers, v[1:] / v[:-1] - 1.0, "simple")


def descriptive_stats(returns: ReturnMatrix) -> DescriptiveStats:
    """Per-ticker mean/std plus correlation and covariance, all with the N-1 divisor."""
    x = returns.values
    if x.shape[0] < 2:
        raise InsufficientDataError("need at least 2 return rows for statistics")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    cov = (cov + cov.T) / 2
    var = np.diag(cov).copy()
    std = np.sqrt(var)
    for i, ticker in enumerate(returns.tickers):
        if not std[i] > 0:
            raise DataError(f"ticker {ticker} has zero return variance")
    corr = cov / np.outer(std, std)
    corr = np.clip((corr + corr.T) / 2, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return DescriptiveStats(
        returns.tickers, _frozen(mean), _frozen(std), _frozen(corr), _frozen(cov), x.shape[0]
    )


def slice_period(returns: ReturnMatrix, start, end) -> ReturnMatrix:
    """Rows with ``start <= date < end``."""
    start, end = _as_day(start), _as_day(end)
    if not start < end:
        raise PreconditionError(f"slice start {start} must precede end {end}")
    mask = (returns.dates >= start) & (returns.dates < end)
    if not mask.any():
        raise InsufficientDataError(f"no rows in [{start}, {end})")
    return ReturnMatrix(returns.dates[mask], returns.tickers, returns.values[mask], returns.kind)


def write_stats_csv(stats: DescriptiveStats, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "mean", "std"])
        for t, m, s in zip(stats.tickers, stats.mean, stats.std):
            w.writerow([t, repr(float(m)), repr(float(s))])


def write_matrix_csv(tickers: Sequence[str], matrix: np.ndarray, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", *tickers])
        for t, row in zip(tickers, matrix):
            w.writerow([t, *(repr(float(x)) for x in row)])


def read_matrix_csv(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 2:
        raise EmptyInputError(f"{path}: empty matrix file")
    tickers = tuple(rows[0][1:])
    if [r[0] for r in rows[1:]] != list(tickers):
        raise DataFormatError(f"{path}: row labels must match header tickers")
    try:
        matrix = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    if matrix.shape != (len(tickers), len(tickers)):
        raise DataFormatError(f"{path}: matrix must be square")
    return tickers, matrix
