import math

import numpy as np
import pytest

from clustersharpe import optimizer as opt
from clustersharpe.errors import PreconditionError, ZeroVarianceError

from conftest import random_problem


def problem(mu, cov, rf=0.0):
    return opt.OptimizationProblem(tuple(f"A{i}" for i in range(len(mu))), mu, cov, rf)


def loop_sharpe(w, mu, cov, rf):
    ret = sum(w[i] * mu[i] for i in range(len(w)))
    var = sum(w[i] * cov[i][j] * w[j] for i in range(len(w)) for j in range(len(w)))
    return (ret - rf) / math.sqrt(var)


def central_diff(f, w, h=1e-6):
    g = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


# -- sharpe_ratio ------------------------------------------------------------


def test_sharpe_single_asset():
    p = problem([0.001], [[0.0004]])
    assert opt.sharpe_ratio(np.ones(1), p) == pytest.approx(0.05, rel=1e-14)


def test_sharpe_zero_numerator():
    p = problem([0.002, 0.001], np.diag([0.0004, 0.0009]), rf=0.002)
    assert opt.sharpe_ratio(np.array([1.0, 0.0]), p) == 0.0


def test_sharpe_scalar_loop():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = random_problem(rng, 4, rf=1e-4)
        w = rng.dirichlet(np.ones(4))
        assert opt.sharpe_ratio(w, p) == pytest.approx(loop_sharpe(w, p.mean_returns, p.covariance, 1e-4), abs=1e-12)


def test_sharpe_zero_variance_raises():
    p = problem([0.001, 0.001], [[1e-4, -1e-4], [-1e-4, 1e-4]])
    with pytest.raises(ZeroDivisionError):
        opt.sharpe_ratio(np.array([0.5, 0.5]), p)
    with pytest.raises(ZeroVarianceError):
        opt.sharpe_gradient(np.array([0.5, 0.5]), p)


# -- gradient ----------------------------------------------------------------


def test_gradient_single_asset_rf_zero():
    p = problem([0.001], [[0.0004]])
    assert opt.sharpe_gradient(np.ones(1), p)[0] == pytest.approx(0.0, abs=1e-15)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        p = random_problem(rng, n, rf=float(rng.choice([0.0, 2e-4])))
        w = rng.dirichlet(np.ones(n))
        g = opt.sharpe_gradient(w, p)
        fd = central_diff(lambda v: opt.sharpe_ratio(v, p), w)
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


def test_gradient_zero_excess():
    rng = np.random.default_rng(2)
    base = random_problem(rng, 3)
    p = problem(np.full(3, 3e-4), base.covariance, rf=3e-4)
    w = np.array([0.2, 0.3, 0.5])
    g = opt.sharpe_gradient(w, p)
    np.testing.assert_allclose(g, p.mean_returns / math.sqrt(w @ p.covariance @ w), rtol=1e-12)
    fd = central_diff(lambda v: opt.sharpe_ratio(v, p), w)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


# -- projection ---------------------------------------------------------------


def test_project_simplex_properties():
    rng = np.random.default_rng(4)
    for _ in range(100):
        v = rng.normal(scale=2, size=int(rng.integers(1, 8)))
        w = opt.project_simplex(v)
        assert w.min() >= 0 and w.sum() == pytest.approx(1.0, abs=1e-12)
        # optimality: (v - w) . (u - w) <= 0 for every vertex u
        for i in range(len(v)):
            u = np.eye(len(v))[i]
            assert (v - w) @ (u - w) <= 1e-12


def test_project_simplex_fixed_point():
    w = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(opt.project_simplex(w), w, atol=1e-16)


# -- equal weights / weights type --------------------------------------------


@pytest.mark.parametrize("n", [1, 4, 10])
def test_equal_weights(n):
    w = opt.equal_weights(n).weights
    assert np.all(w == w[0]) and w[0] == pytest.approx(1 / n)
    assert abs(w.sum() - 1.0) <= 1e-15


def test_equal_weights_rejects_zero():
    with pytest.raises(PreconditionError):
        opt.equal_weights(0)


def test_portfolio_weights_clamps_tiny_negatives():
    w = opt.PortfolioWeights(("A", "B"), [-5e-11, 1.0])
    assert w.weights[0] == 0.0 and w.weights.sum() == 1.0
    with pytest.raises(PreconditionError):
        opt.PortfolioWeights(("A", "B"), [-0.1, 1.1])


# -- problem validation ---------------------------------------------------------


def test_problem_rejects_non_psd():
    with pytest.raises(PreconditionError, match="positive semi-definite"):
        problem([0.001, 0.001], [[1e-4, 2e-4], [2e-4, 1e-4]])


def test_problem_rejects_zero_variance_asset():
    with pytest.raises(PreconditionError, match="A1"):
        problem([0.001, 0.001], [[1e-4, 0.0], [0.0, 0.0]])


# -- grid oracle --------------------------------------------------------------


def test_grid_oracle_single():
    np.testing.assert_array_equal(opt.grid_oracle(problem([1e-3], [[1e-4]]), 0.1).weights, [1.0])


def test_lattice_enumeration():
    np.testing.assert_array_equal(opt.simplex_lattice(2, 0.5), [[0, 1], [0.5, 0.5], [1, 0]])
    assert len(opt.simplex_lattice(3, 0.01)) == math.comb(102, 2)
    assert len(opt.simplex_lattice(4, 0.05)) == math.comb(23, 3)


def test_grid_oracle_guards():
    rng = np.random.default_rng(0)
    with pytest.raises(PreconditionError):
        opt.grid_oracle(random_problem(rng, 5), 0.1)
    with pytest.raises(PreconditionError):
        opt.grid_oracle(random_problem(rng, 2), 0.3)


def test_grid_oracle_tie_lexicographic():
    # identical assets: every lattice point ties (exact in binary at step 0.25), smallest vector wins
    p = problem([1e-3, 1e-3], [[1e-4, 1e-4], [1e-4, 1e-4]])
    np.testing.assert_array_equal(opt.grid_oracle(p, 0.25).weights, [0.0, 1.0])


# -- maximize_sharpe ------------------------------------------------------------


def test_single_asset():
    r = opt.maximize_sharpe(problem([1e-3], [[1e-4]]))
    np.testing.assert_array_equal(r.weights.weights, [1.0])
    assert r.converged


def test_symmetric_pair():
    r = opt.maximize_sharpe(problem([1e-3, 1e-3], np.diag([4e-4, 4e-4])))
    np.testing.assert_allclose(r.weights.weights, [0.5, 0.5], atol=1e-9)


def test_two_asset_grid_example():
    p = problem([0.001, 0.0005], np.diag([0.0004, 0.0004]))
    r = opt.maximize_sharpe(p)
    g = opt.grid_oracle(p, 1e-4)
    np.testing.assert_allclose(r.weights.weights, g.weights, atol=1e-3)
    # closed form on this face: w proportional to mu / var
    np.testing.assert_allclose(r.weights.weights, [2 / 3, 1 / 3], atol=1e-9)


def test_all_negative_excess_picks_best_vertex():
    p = problem([-1e-3, -2e-4, -5e-4], np.diag([1e-4, 4e-4, 1e-4]))
    r = opt.maximize_sharpe(p)
    # a negative-Sharpe maximum over the simplex sits on a vertex: best is asset 1 (-0.01)
    np.testing.assert_array_equal(r.weights.weights, [0.0, 1.0, 0.0])
    assert r.sharpe == pytest.approx(-0.01)


def test_dominates_equal_weights_and_feasible():
    rng = np.random.default_rng(99)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        p = random_problem(rng, n, rf=float(rng.choice([0.0, 5e-4])))
        r = opt.maximize_sharpe(p)
        w = r.weights.weights
        assert abs(w.sum() - 1) <= 1e-8 and w.min() >= 0
        assert r.sharpe >= opt.sharpe_ratio(np.full(n, 1 / n), p) - 1e-12


def test_tangency_when_non_negative():
    rng = np.random.default_rng(12)
    checked = 0
    while checked < 30:
        n = int(rng.integers(2, 6))
        p = random_problem(rng, n)
        y = np.linalg.solve(p.covariance, p.mean_returns)
        if not np.all(y > 0):
            continue
        checked += 1
        target = opt.sharpe_ratio(y / y.sum(), p)
        assert opt.maximize_sharpe(p).sharpe == pytest.approx(target, abs=1e-6)


def test_agrees_with_scipy_slsqp():
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(31)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        p = random_problem(rng, n)
        if p.mean_returns.max() <= 0:
            continue
        res = scipy_opt.minimize(
            lambda w: -opt.sharpe_ratio(w, p),
            np.full(n, 1 / n),
            method="SLSQP",
            bounds=[(0, 1)] * n,
            constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
            options={"ftol": 1e-14, "maxiter": 1000},
        )
        ours = opt.maximize_sharpe(p).sharpe
        # SLSQP is local; ours must never be worse than it
        assert ours >= -res.fun - 1e-8


def test_deterministic():
    p = random_problem(np.random.default_rng(5), 5)
    a, b = opt.maximize_sharpe(p), opt.maximize_sharpe(p)
    np.testing.assert_array_equal(a.weights.weights, b.weights.weights)
    assert a.iterations == b.iterations
