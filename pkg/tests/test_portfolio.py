import numpy as np
import pytest

from coordsplit.errors import InfeasibleError
from coordsplit.operators import ProjPortfolio, portfolio_multipliers, proj_portfolio

from oracles import portfolio_projection


def feasible_instance(rng, n):
    while True:
        xi = rng.normal(0.01, 1.0, n)
        if xi.max() > 0.05:
            c = rng.uniform(-0.5, 0.95) * xi.max()
            return xi, c


def test_interior_point_is_fixed():
    xi = np.array([1.0, 0.5, 0.2])
    v = np.array([0.2, 0.3, 0.1])
    np.testing.assert_allclose(proj_portfolio(v, xi, 0.1), v, atol=1e-14)


def test_nonpositive_input_projects_to_origin():
    xi = np.array([0.5, 1.0, 2.0])
    np.testing.assert_array_equal(proj_portfolio(np.array([-1.0, 0.0, -3.0]), xi, 0.0), 0.0)


def test_infeasible_return():
    with pytest.raises(InfeasibleError):
        proj_portfolio(np.zeros(3), np.array([0.1, 0.2, -1.0]), 0.3)
    with pytest.raises(InfeasibleError):
        ProjPortfolio(np.array([-0.5, -0.1]), 0.01)


def test_matches_active_set_oracle():
    rng = np.random.default_rng(31)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        xi, c = feasible_instance(rng, n)
        v = rng.normal(0, 1.0, n)
        np.testing.assert_allclose(proj_portfolio(v, xi, c), portfolio_projection(v, xi, c), atol=1e-6)


@pytest.mark.parametrize("n", [10, 200, 2000])
def test_feasibility_and_idempotence(n):
    rng = np.random.default_rng(n)
    xi, c = feasible_instance(rng, n)
    v = rng.normal(0, 1.0, n)
    y = proj_portfolio(v, xi, c)
    assert y.min() >= 0
    assert y.sum() <= 1 + 1e-8
    assert xi @ y >= c - 1e-8
    np.testing.assert_allclose(proj_portfolio(y, xi, c), y, atol=1e-9)


def test_kkt_of_projection():
    rng = np.random.default_rng(32)
    xi, c = feasible_instance(rng, 50)
    v = rng.normal(0, 1.0, 50)
    mu, nu = portfolio_multipliers(v, xi, c)
    y = np.maximum(v - mu + nu * xi, 0.0)
    assert mu >= 0 and nu >= 0
    # complementary slackness
    assert mu * (1.0 - y.sum()) == pytest.approx(0.0, abs=1e-8)
    assert nu * (xi @ y - c) == pytest.approx(0.0, abs=1e-8)


def test_nonexpansive():
    rng = np.random.default_rng(33)
    xi, c = feasible_instance(rng, 30)
    for _ in range(50):
        u, v = rng.normal(0, 2.0, (2, 30))
        du = np.linalg.norm(proj_portfolio(u, xi, c) - proj_portfolio(v, xi, c))
        assert du <= np.linalg.norm(u - v) + 1e-9


def test_cached_multipliers_reproduce_projection():
    rng = np.random.default_rng(34)
    xi, c = feasible_instance(rng, 40)
    op = ProjPortfolio(xi, c)
    v = rng.normal(0, 1.0, 40)
    op.refresh(v)
    np.testing.assert_allclose([op.coord(a, i) for i, a in enumerate(v)], op.full(v), atol=1e-12)
    assert op.violation(op.full(v)) <= 1e-8
    assert op.violation(np.full(40, 1.0)) == pytest.approx(39.0)
