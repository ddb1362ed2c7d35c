"""Flat ``key = value`` run configuration.

Grammar: one ``key = value`` (or ``key: value``) per line, ``#`` and ``;``
start comment lines, keys are case-insensitive and may use ``-`` or ``_``.
Lists are comma separated. Command-line flags override file values.
"""

from __future__ import annotations

import configparser
import dataclasses
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .backtest import BacktestConfig
from .errors import ConfigurationError
from .optimizer import SolverConfig
from .synth import SyntheticSpec, block_correlation, covariance_from

_SECTION = "run"


def load_kv(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    try:
        parser.read_string(f"[{_SECTION}]\n{text}", source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"bad config file {path}: {exc}".replace("\n", " ")) from None
    return {k.replace("-", "_"): v.strip() for k, v in parser[_SECTION].items()}


def _date(v: Any) -> dt.date:
    if isinstance(v, dt.date):
        return v
    return dt.date.fromisoformat(str(v))


def _bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v: Any) -> list[float]:
    if isinstance(v, (list, tuple, np.ndarray)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x.strip()]


_BACKTEST_FIELDS = {
    "train_start": _date,
    "train_end": _date,
    "test_start": _date,
    "test_end": _date,
    "k": int,
    "seed": int,
    "risk_free_rate": float,
    "trading_days_per_year": int,
    "feature_kind": str,
    "kmeans_max_iter": int,
    "kmeans_tol": float,
    "n_init": int,
    "rebalance": str,
    "benchmark": str,
    "sharpe_convention": str,
}
_SOLVER_FIELDS = {"max_iter": int, "tol": float}
_RUN_FIELDS = {"input": str, "output": str, "charts": _bool}
KNOWN_KEYS = frozenset(_BACKTEST_FIELDS) | frozenset(_SOLVER_FIELDS) | frozenset(_RUN_FIELDS)


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    output: str = "out"
    charts: bool = True
    backtest: BacktestConfig = field(default_factory=BacktestConfig)


def build_run_config(file_values: Mapping[str, Any] | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Merge file values with flag overrides (``None`` overrides are ignored) and validate."""
    merged: dict[str, Any] = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(merged) - KNOWN_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")

    def convert(table: Mapping[str, Any]) -> dict[str, Any]:
        out = {}
        for key, conv in table.items():
            if key in merged:
                try:
                    out[key] = conv(merged[key])
                except (TypeError, ValueError) as exc:
                    raise ConfigurationError(f"bad value for {key}: {exc}") from None
        return out

    solver = SolverConfig(**convert(_SOLVER_FIELDS))
    bt = BacktestConfig(**convert(_BACKTEST_FIELDS), solver=solver)
    if bt.k <= 0:
        raise ConfigurationError(f"k must be positive, got {bt.k}")
    if solver.max_iter < 1 or solver.tol < 0 or bt.kmeans_max_iter < 1 or bt.n_init < 1:
        raise ConfigurationError("iteration counts must be >= 1 and tolerances >= 0")
    run = convert(_RUN_FIELDS)
    return RunConfig(backtest=bt, **run)


def run_config_to_kv(cfg: RunConfig) -> dict[str, str]:
    """Inverse of :func:`build_run_config`, for recording the effective settings."""
    out: dict[str, str] = {}
    if cfg.input is not None:
        out["input"] = cfg.input
    out["output"] = cfg.output
    out["charts"] = str(cfg.charts).lower()
    for f in dataclasses.fields(cfg.backtest):
        if f.name == "solver":
            continue
        out[f.name] = str(getattr(cfg.backtest, f.name))
    out["max_iter"] = str(cfg.backtest.solver.max_iter)
    out["tol"] = repr(cfg.backtest.solver.tol)
    return out


def synthetic_spec_from_kv(values: Mapping[str, str], base_dir: Path | None = None) -> SyntheticSpec:
    """Build a :class:`SyntheticSpec` from key-value settings.

    Keys: ``tickers``, ``drift``, and either ``covariance`` (path to a square
    ticker-labelled CSV) or ``vol`` plus optional ``corr`` (a constant
    off-diagonal correlation). Optional: ``start``, ``n_days``, ``seed``,
    ``start_price``.
    """
    from .market_data import read_matrix_csv

    try:
        tickers = tuple(t.strip() for t in values["tickers"].split(",") if t.strip())
        n = len(tickers)
        drift = _floats(values.get("drift", ",".join(["0"] * n)))
        if len(drift) == 1 and n > 1:
            drift = drift * n
        if "covariance" in values:
            path = Path(values["covariance"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            cov_tickers, cov = read_matrix_csv(path)
            if cov_tickers != tickers:
                raise ConfigurationError("covariance file tickers do not match 'tickers'")
        else:
            vol = _floats(values["vol"])
            if len(vol) == 1 and n > 1:
                vol = vol * n
            rho = float(values.get("corr", "0"))
            cov = covariance_from(vol, block_correlation([], n, within=1.0, across=rho))
        kwargs: dict[str, Any] = {}
        if "start" in values:
            kwargs["start"] = _date(values["start"])
        for key in ("n_days", "seed"):
            if key in values:
                kwargs[key] = int(values[key])
        if "start_price" in values:
            kwargs["start_price"] = float(values["start_price"])
    except KeyError as exc:
        raise ConfigurationError(f"synthetic spec missing key {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad synthetic spec: {exc}") from None
    return SyntheticSpec(tickers=tickers, drift=np.array(drift), covariance=np.array(cov), **kwargs)
