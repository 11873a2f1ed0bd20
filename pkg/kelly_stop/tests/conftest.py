import pytest

from kelly_stop.core import Grid, MarketParams, derive_params
from kelly_stop.solver import StopLossProblem, solve_stop_loss


@pytest.fixture(scope='session')
def market():
    # s = 1, alpha_K = 10, tau = 2 years
    return MarketParams(mu=0.10, r=0.0, sigma=0.10)


@pytest.fixture(scope='session')
def dp(market):
    return derive_params(market)


@pytest.fixture(scope='session')
def small_surface():
    return solve_stop_loss(StopLossProblem(grid=Grid.for_horizon(40, 3.0)))


@pytest.fixture(scope='session')
def month_surface(dp):
    return solve_stop_loss(StopLossProblem.for_market(dp, '1m', 100))


@pytest.fixture(scope='session')
def long_surface():
    return solve_stop_loss(StopLossProblem(grid=Grid.for_horizon(200, 5.0)))
