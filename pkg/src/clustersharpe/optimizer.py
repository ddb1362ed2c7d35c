"""Long-only, fully invested maximum-Sharpe portfolios.

The solver is projected-gradient ascent on the Sharpe ratio over the
probability simplex, started from equal weights. Each ascent is followed by a
face polish: on the current support the best direction is the tangency
solution ``inv(cov_S) @ excess_S``, which is taken whenever it is strictly
positive and improves the objective. Extra restarts from the simplex vertices
guard against the non-concave region where every reachable excess return is
negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import PreconditionError, ZeroVarianceError

PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class OptimizationProblem:
    tickers: tuple[str, ...]
    mean_returns: np.ndarray
    covariance: np.ndarray
    risk_free_rate: float = 0.0

    def __post_init__(self) -> None:
        mu = np.asarray(self.mean_returns, dtype=float).reshape(-1)
        cov = np.asarray(self.covariance, dtype=float)
        n = len(self.tickers)
        if n < 1:
            raise PreconditionError("problem needs at least one asset")
        if mu.shape != (n,) or cov.shape != (n, n):
            raise PreconditionError("mean/covariance dimensions do not match tickers")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise PreconditionError("mean and covariance must be finite")
        scale = max(float(np.max(np.abs(cov))), 1.0)
        if np.max(np.abs(cov - cov.T)) > PSD_TOL * scale:
            raise PreconditionError("covariance is not symmetric")
        cov = (cov + cov.T) / 2
        if np.linalg.eigvalsh(cov)[0] < -PSD_TOL:
            raise PreconditionError("covariance is not positive semi-definite")
        zero = [t for t, v in zip(self.tickers, np.diag(cov)) if not v > 0]
        if zero:
            raise PreconditionError(f"zero-variance assets: {', '.join(zero)}")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "mean_returns", mu)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "risk_free_rate", float(self.risk_free_rate))

    @property
    def n(self) -> int:
        return len(self.tickers)

    @property
    def excess(self) -> np.ndarray:
        return self.mean_returns - self.risk_free_rate


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    tickers: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape != (len(self.tickers),):
            raise PreconditionError("weights and tickers differ in length")
        if np.any(w < -1e-10) or not np.all(np.isfinite(w)):
            raise PreconditionError("weights must be non-negative")
        w = np.where(w < 0, 0.0, w)
        total = w.sum()
        if not total > 0:
            raise PreconditionError("weights sum to zero")
        if abs(total - 1.0) > 1e-8 or np.any(self.weights != w):
            w = w / total
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "weights", w)

    def as_dict(self) -> dict[str, float]:
        return {t: float(x) for t, x in zip(self.tickers, self.weights)}


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 1000
    tol: float = 1e-10
    armijo: float = 1e-4
    vertex_restarts: bool = True


@dataclass(frozen=True, eq=False)
class SolverResult:
    weights: PortfolioWeights
    sharpe: float
    iterations: int
    converged: bool
    start: str = "equal"
    extra: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        return {
            "sharpe": self.sharpe,
            "iterations": self.iterations,
            "converged": self.converged,
            "start": self.start,
            "weights": self.weights.as_dict(),
        }


def _w(weights) -> np.ndarray:
    return weights.weights if isinstance(weights, PortfolioWeights) else np.asarray(weights, float)


def _variance(w: np.ndarray, cov: np.ndarray) -> float:
    return float(w @ cov @ w)


def sharpe_ratio(weights: PortfolioWeights | np.ndarray, problem: OptimizationProblem) -> float:
    """Per-period Sharpe ratio ``(w.mu - rf) / sqrt(w' cov w)``."""
    w = _w(weights)
    var = _variance(w, problem.covariance)
    if not var > 0:
        raise ZeroVarianceError("portfolio variance is zero")
    return float((w @ problem.mean_returns - problem.risk_free_rate) / np.sqrt(var))


def sharpe_gradient(weights: PortfolioWeights | np.ndarray, problem: OptimizationProblem) -> np.ndarray:
    w = _w(weights)
    cov_w = problem.covariance @ w
    var = float(w @ cov_w)
    if not var > 0:
        raise ZeroVarianceError("portfolio variance is zero")
    sigma = np.sqrt(var)
    excess = float(w @ problem.mean_returns) - problem.risk_free_rate
    return problem.mean_returns / sigma - (excess / sigma**3) * cov_w


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum(w) = 1}`` by sort and threshold."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def equal_weights(n: int, tickers: Sequence[str] | None = None) -> PortfolioWeights:
    if n <= 0:
        raise PreconditionError(f"n must be positive, got {n}")
    tickers = tuple(tickers) if tickers is not None else tuple(f"asset_{i}" for i in range(n))
    return PortfolioWeights(tickers, np.full(n, 1.0 / n))


def _objective(w: np.ndarray, problem: OptimizationProblem) -> float:
    var = _variance(w, problem.covariance)
    if not var > 0:
        return -np.inf
    return float((w @ problem.mean_returns - problem.risk_free_rate) / np.sqrt(var))


def _ascend(w: np.ndarray, problem: OptimizationProblem, cfg: SolverConfig, budget: int):
    f = _objective(w, problem)
    step = 1.0
    it = 0
    while it < budget:
        it += 1
        g = sharpe_gradient(w, problem)
        while True:
            cand = project_simplex(w + step * g)
            f_cand = _objective(cand, problem)
            if f_cand >= f + cfg.armijo * float(g @ (cand - w)):
                break
            step *= 0.5
            if step < 1e-30:
                return w, f, it, True
        moved = float(np.max(np.abs(cand - w)))
        if f_cand >= f:
            w, f = cand, f_cand
        if moved <= cfg.tol:
            return w, f, it, True
        step *= 2.0
    return w, f, it, False


def _polish(w: np.ndarray, f: float, problem: OptimizationProblem):
    """Jump to the tangency point of the current face, shrinking the face until it is feasible."""
    support = list(np.flatnonzero(w > 0))
    while support:
        cov = problem.covariance[np.ix_(support, support)]
        try:
            y = np.linalg.solve(cov, problem.excess[support])
        except np.linalg.LinAlgError:
            return w, f
        if not np.all(np.isfinite(y)):
            return w, f
        if np.all(y > 0):
            cand = np.zeros_like(w)
            cand[support] = y / y.sum()
            f_cand = _objective(cand, problem)
            return (cand, f_cand) if f_cand > f else (w, f)
        del support[int(np.argmin(y))]
    return w, f


def _is_stationary(w: np.ndarray, problem: OptimizationProblem, rtol: float = 1e-9) -> bool:
    """First-order conditions for maximizing over the simplex."""
    g = sharpe_gradient(w, problem)
    on = w > 0
    level = float(np.mean(g[on]))
    tol = rtol * max(float(np.max(np.abs(g))), 1e-300)
    return bool(np.all(np.abs(g[on] - level) <= tol) and np.all(g[~on] <= level + tol))


def _solve_from(start: np.ndarray, problem: OptimizationProblem, cfg: SolverConfig, burst: int = 50):
    w, f = start, _objective(start, problem)
    total, converged = 0, False
    while total < cfg.max_iter:
        w, f, it, converged = _ascend(w, problem, cfg, min(burst, cfg.max_iter - total))
        total += it
        w, f = _polish(w, f, problem)
        if _is_stationary(w, problem):
            converged = True
        if converged:
            break
    return w, f, total, converged


def maximize_sharpe(problem: OptimizationProblem, config: SolverConfig | None = None) -> SolverResult:
    cfg = config or SolverConfig()
    n = problem.n
    if n == 1:
        w = np.ones(1)
        return SolverResult(PortfolioWeights(problem.tickers, w), sharpe_ratio(w, problem), 0, True)

    starts = [("equal", np.full(n, 1.0 / n))]
    if cfg.vertex_restarts:
        starts += [(f"vertex_{i}", np.eye(n)[i]) for i in range(n)]
    best = None
    total_iter = 0
    for name, start in starts:
        # a stationary point with positive Sharpe is the global maximum
        if best is not None and best[1] > 0 and best[2]:
            break
        w, f, it, converged = _solve_from(start, problem, cfg)
        total_iter += it
        if best is None or f > best[1]:
            best = (w, f, converged, name)
    w, f, converged, name = best
    weights = PortfolioWeights(problem.tickers, w)
    return SolverResult(weights, sharpe_ratio(weights, problem), total_iter, converged, name)


@lru_cache(maxsize=None)
def _compositions(m: int, n: int) -> np.ndarray:
    """All non-negative integer n-vectors summing to m, in lexicographic order."""
    if n == 1:
        return np.array([[m]], dtype=np.int64)
    blocks = []
    for first in range(m + 1):
        rest = _compositions(m - first, n - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def simplex_lattice(n: int, step: float) -> np.ndarray:
    m = round(1.0 / step)
    if m < 1 or abs(m * step - 1.0) > 1e-9:
        raise PreconditionError(f"step {step} does not divide 1 into an integer grid")
    return _compositions(m, n) / m


def grid_oracle(problem: OptimizationProblem, step: float = 0.01) -> PortfolioWeights:
    """Exact argmax of the Sharpe ratio over the simplex lattice of resolution ``step``.

    Ties go to the lexicographically smallest weight vector.
    """
    if problem.n > 4:
        raise PreconditionError("grid_oracle is limited to at most 4 assets")
    grid = simplex_lattice(problem.n, step)
    var = np.einsum("pi,ij,pj->p", grid, problem.covariance, grid)
    ret = grid @ problem.mean_returns - problem.risk_free_rate
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(var > 0, ret / np.sqrt(np.where(var > 0, var, 1.0)), -np.inf)
    return PortfolioWeights(problem.tickers, grid[int(np.argmax(score))])
