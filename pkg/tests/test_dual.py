import numpy as np
import pytest

from dislag.cases import ieee14
from dislag.dual import check_slater, q_eval, q_subgradient, solve_dual
from dislag.errors import BracketFailure
from dislag.problem import Box, ConvexCost, NodeSpec, Problem, Quadratic2

from conftest import random_problem

# Frozen from the independent waterfilling oracle below.
IEEE14_LAMBDA_STAR = -7.299180327754586
IEEE14_F_STAR = 1547.8184767153882
IEEE14_X_STAR = (66.23975409836066, 71.65300546448087, 47.131147540983605, 54.98633879781421, 59.989754098360656)


def square(x):
    return x * x


def waterfill(a, b, pmax, demand, iters=200):
    """Marginal-price bisection: find mu with sum clip((mu - b)/(2a), 0, pmax) = demand."""
    lo, hi = 0.0, float(np.max(2 * a * pmax + b))
    for _ in range(iters):
        mu = 0.5 * (lo + hi)
        if np.clip((mu - b) / (2 * a), 0, pmax).sum() < demand:
            lo = mu
        else:
            hi = mu
    mu = 0.5 * (lo + hi)
    x = np.clip((mu - b) / (2 * a), 0, pmax)
    return mu, x, float(np.sum(a * x * x + b * x))


def test_waterfilling_oracle_is_grid_consistent():
    a = np.array([0.04, 0.03, 0.035, 0.03, 0.04])
    b = np.array([2.0, 3.0, 4.0, 4.0, 2.5])
    pmax = np.array([80.0, 90.0, 70.0, 70.0, 80.0])
    mu, x, f = waterfill(a, b, pmax, 300.0)
    assert mu == pytest.approx(-IEEE14_LAMBDA_STAR, rel=1e-9)
    assert f == pytest.approx(IEEE14_F_STAR, rel=1e-9)
    np.testing.assert_allclose(x, IEEE14_X_STAR, rtol=1e-8)
    # each node's allocation minimizes f_i(x) - mu*x on a fine grid
    grid = np.linspace(0, 90, 900001)
    for ai, bi, pi, xi in zip(a, b, pmax, x):
        g = grid[grid <= pi]
        assert g[np.argmin(ai * g * g + bi * g - mu * g)] == pytest.approx(xi, abs=2e-4)


def test_q_eval_examples():
    p1 = Problem([NodeSpec(0, ConvexCost(square), Box(-1, 1), 0.0)])
    assert q_eval(p1, 0.0) == pytest.approx(0.0, abs=1e-12)
    p2 = Problem([NodeSpec(0, Quadratic2(1.0, 0.0), Box(-10, 10), 0.0)])
    assert q_eval(p2, 2.0) == pytest.approx(1.0)
    assert q_eval(ieee14(), -7.2999) - q_eval(ieee14(), IEEE14_LAMBDA_STAR) < 1e-2


def test_q_subgradient_examples():
    p = ieee14()
    assert q_subgradient(p, 1e6) == pytest.approx(np.sum(p.b - p.lo))
    assert q_subgradient(p, -1e6) == pytest.approx(np.sum(p.b - p.hi))
    assert abs(q_subgradient(p, IEEE14_LAMBDA_STAR)) < 1e-7
    # all five nodes are interior at the optimum, so the slope there is sum 1/(2a_i)
    slope = sum(1 / (2 * nd.cost.a) for nd in p.nodes)
    offset = -7.2999 - IEEE14_LAMBDA_STAR
    assert q_subgradient(p, -7.2999) == pytest.approx(slope * offset, rel=1e-6)


def test_solve_dual_examples():
    two = Problem([NodeSpec(i, Quadratic2(1.0, 0.0), Box(0, 10), 2.0) for i in range(2)])
    res = solve_dual(two)
    assert res.lambda_star == pytest.approx(-4.0, abs=1e-8)
    np.testing.assert_allclose(res.x_star, [2.0, 2.0], atol=1e-8)

    res = solve_dual(ieee14())
    assert res.lambda_star == pytest.approx(IEEE14_LAMBDA_STAR, rel=1e-6)
    assert res.f_star == pytest.approx(IEEE14_F_STAR, rel=1e-6)
    np.testing.assert_allclose(res.x_star, IEEE14_X_STAR, rtol=1e-6)

    fixed = Problem([NodeSpec(0, Quadratic2(1.0, 0.0), Box(5, 5), 5.0)])
    res = solve_dual(fixed)
    assert res.residual == 0.0
    assert res.x_star[0] == 5.0


def test_solve_dual_bracket_failure():
    p = Problem([NodeSpec(i, Quadratic2(1.0, 0.0), Box(0, 1), 5.0) for i in range(2)])
    with pytest.raises(BracketFailure):
        solve_dual(p)


def test_check_slater():
    assert check_slater(ieee14())
    edge = Problem([NodeSpec(i, Quadratic2(1.0, 0.0), Box(0, 1), 1.0) for i in range(2)])
    assert not check_slater(edge)
    over = Problem([NodeSpec(i, Quadratic2(1.0, 0.0), Box(0, 1), 2.0) for i in range(2)])
    assert not check_slater(over)


def test_q_is_convex_and_minimized_at_lambda_star(rng):
    for _ in range(20):
        p = random_problem(rng)
        res = solve_dual(p)
        grid = np.linspace(res.lambda_star - 20, res.lambda_star + 20, 801)
        q = q_eval(p, grid)
        assert np.all(np.diff(q, 2) >= -1e-9)
        assert q.min() >= res.q_star - 1e-7


def test_subgradient_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(20):
        p = random_problem(rng)
        for lam in rng.uniform(-30, 30, 5):
            q2 = np.array([nd.cost.a for nd in p.nodes])
            q1 = np.array([nd.cost.b for nd in p.nodes])
            free = -(q1 + lam) / (2 * q2)
            if np.min(np.minimum(np.abs(free - p.lo), np.abs(free - p.hi))) < 1e-3:
                continue
            fd = (q_eval(p, lam + h) - q_eval(p, lam - h)) / (2 * h)
            assert fd == pytest.approx(q_subgradient(p, lam), abs=1e-4)


def test_subgradient_is_nondecreasing(rng):
    p = random_problem(rng, n=15)
    g = q_subgradient(p, np.linspace(-100, 100, 2001))
    assert np.all(np.diff(g) >= -1e-12)


def test_general_cost_path_agrees_with_quadratic(rng):
    p = random_problem(rng, n=6)
    generic = Problem([NodeSpec(nd.id, ConvexCost(nd.cost), nd.box, nd.b) for nd in p.nodes])
    a, b = solve_dual(p), solve_dual(generic)
    assert b.lambda_star == pytest.approx(a.lambda_star, abs=1e-5)
    assert b.f_star == pytest.approx(a.f_star, rel=1e-6)
