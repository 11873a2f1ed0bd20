"""Residual and oracle checks run by ``kellystop check``.

Each check is a function returning ``(passed, detail)``, registered with :func:`register`.
"""
import logging
import math
import typing

import numpy as np

from kelly_stop import analytic, solver, value_fn
from kelly_stop.core import Grid, MarketParams, derive_params
from kelly_stop.simulate import (
    ConstantStrategy,
    MultiAssetParams,
    SimConfig,
    apply_var_cap,
    kelly_market_params,
    kelly_portfolio_stats,
    kelly_weights,
    simulate,
)
from kelly_stop.utils import observed_order

log = logging.getLogger(__name__)

# s = 1, alpha_K = 10, tau = 2 years
MARKET = MarketParams(mu=0.10, r=0.0, sigma=0.10)
DP = derive_params(MARKET)
T = 1.0
PI_C = 0.95
STEPS = (1e-2, 5e-3, 2.5e-3)
MIN_ORDER = 1.9


class CheckResult(typing.NamedTuple):
    name: str
    passed: bool
    detail: str


_registry: typing.Dict[str, typing.Callable] = {}


def register(name: str):
    def decorator(fn):
        _registry[name] = fn
        return fn
    return decorator


def names() -> typing.List[str]:
    return list(_registry)


def run_check(name: str) -> CheckResult:
    try:
        passed, detail = _registry[name]()
    except Exception as e:
        log.exception('Check {} raised'.format(name))
        return CheckResult(name, False, '{}: {}'.format(type(e).__name__, e))
    return CheckResult(name, bool(passed), detail)


def run_all(selected=None) -> typing.List[CheckResult]:
    return [run_check(name) for name in (selected or names())]


def _alpha(strategy):
    return lambda pi, t: strategy.fraction(analytic.StrategyState(pi, t), DP, T)


def _order_check(residual_at):
    """Residuals at the STEPS ladder; passes when they vanish or converge at order >= 2."""
    errors = [abs(residual_at(h)) for h in STEPS]
    if max(errors) < 1e-12:
        return True, 'exact (max residual {:.2e})'.format(max(errors))
    order = observed_order(errors, STEPS)[-1]
    return order >= MIN_ORDER, 'residuals {} order {:.3f}'.format(
        ', '.join('{:.2e}'.format(e) for e in errors), order)


def _alpha_residual(strategy, point):
    alpha = _alpha(strategy)
    return _order_check(
        lambda h: solver.pde_residual_alpha(alpha, MARKET.sigma, point, h, h).residual)


@register('alpha-pde/free-kelly')
def check_alpha_free_kelly():
    return _alpha_residual(analytic.FreeKelly(), (1.3, 0.5))


@register('alpha-pde/terminal-stop')
def check_alpha_terminal_stop():
    return _alpha_residual(analytic.TerminalStop(PI_C), (1.3, 0.5))


@register('alpha-pde/browne-target')
def check_alpha_browne():
    return _alpha_residual(analytic.BrowneTarget(1.5), (1.0, 0.5))


@register('gamma-pde/terminal-stop')
def check_gamma_terminal_stop():
    def gamma(pi, t):
        return DP.alpha_K * (pi - PI_C)

    residual = solver.pde_residual_gamma(gamma, MARKET.sigma, (1.3, 0.5), 1e-3).residual
    return abs(residual) < 1e-9, 'residual {:.2e}'.format(residual)


@register('gamma-pde/browne-target')
def check_gamma_browne():
    alpha = _alpha(analytic.BrowneTarget(1.5))

    def gamma(pi, t):
        return pi * alpha(pi, t)

    return _order_check(
        lambda h: solver.pde_residual_gamma(gamma, MARKET.sigma, (1.0, 0.5), h).residual)


@register('scaled-pde/terminal-stop')
def check_scaled_terminal_stop():
    u = analytic.TerminalStop(PI_C).scaled_fraction
    residual = solver.pde_residual_scaled(u, (0.6, 0.5), 1e-3, 1e-3).residual
    return abs(residual) < 1e-9, 'residual {:.2e}'.format(residual)


@register('scaled-pde/separable')
def check_scaled_separable():
    return _order_check(lambda h: solver.pde_residual_scaled(
        analytic.separable_strategy, (2.0, 0.5), h, h).residual)


@register('w-pde/terminal-stop')
def check_w_terminal_stop():
    def w(pi, theta):
        return pi - PI_C

    residual = solver.pde_residual_w(w, (1.3, 0.5), 1e-3, 1e-3).residual
    return abs(residual) < 1e-9, 'residual {:.2e}'.format(residual)


@register('separable-ode')
def check_separable_ode():
    right = analytic.separable_ode_residual(analytic.separable_f, 2.0, 2.0, 1e-4)
    wrong = analytic.separable_ode_residual(analytic.separable_f, 1.0, 2.0, 1e-4)
    return abs(right) < 1e-5 and abs(wrong) > 1e-2, \
        'lambda=2: {:.2e}, lambda=1: {:.2e}'.format(right, wrong)


VALUE_VARIANTS = {
    'free-kelly': (analytic.FreeKelly(), (1.3, 0.5)),
    'terminal-stop': (analytic.TerminalStop(PI_C), (1.3, 0.5)),
    'crra': (analytic.CRRA(-1.0), (1.3, 0.5)),
}


def _value(variant):
    return lambda pi, t: variant.value(pi, t, DP, T)


@register('hjb/value-functions')
def check_hjb():
    worst = 0.0
    for variant, point in VALUE_VARIANTS.values():
        worst = max(worst, abs(value_fn.hjb_residual(_value(variant), DP, point, 1e-4).residual))
    return worst < 1e-4, 'max residual {:.2e}'.format(worst)


@register('hjb/strategy-from-value')
def check_strategy_from_value():
    worst = 0.0
    for variant, point in VALUE_VARIANTS.values():
        implied = value_fn.strategy_from_value(_value(variant), DP, point, 1e-4)
        exact = variant.fraction(analytic.StrategyState(*point), DP, T)
        worst = max(worst, abs(implied - exact) / abs(exact))
    return worst < 1e-5, 'max relative error {:.2e}'.format(worst)


@register('hjb/value-ratio')
def check_value_ratio():
    worst = 0.0
    for variant, point in VALUE_VARIANTS.values():
        residual = value_fn.value_ratio_residual(_value(variant), _alpha(variant), DP, point,
                                                 1e-4).residual
        worst = max(worst, abs(residual))
    return worst < 1e-4, 'max residual {:.2e}'.format(worst)


LEGENDRE_VARIANTS = {
    'free-kelly': analytic.FreeKelly(),
    'terminal-stop': analytic.TerminalStop(PI_C),
}


def _transformed(variant):
    return (lambda p, t: variant.legendre_value(p, t, DP, T),
            lambda p, t: variant.legendre_investment(p, t, DP, T))


@register('legendre/identities')
def check_legendre_identities():
    worst = 0.0
    for variant in LEGENDRE_VARIANTS.values():
        K, _ = _transformed(variant)
        defects = value_fn.legendre_defects(_value(variant), K, (1.3, 0.5), 1e-4)
        worst = max(worst, defects.max_abs())
    return worst < 1e-5, 'max defect {:.2e}'.format(worst)


@register('legendre/linear-pdes')
def check_legendre_pdes():
    worst = 0.0
    for variant in LEGENDRE_VARIANTS.values():
        K, phi = _transformed(variant)
        p = 1.0 / (1.3 - getattr(variant, 'pi_c', 0.0))
        lt03 = value_fn.lt_linear_pde_residual(K, DP, (p, 0.5), 1e-4)
        lt06 = value_fn.lt06_residual(phi, DP, (p, 0.5), 1e-4, K=K)
        worst = max(worst, abs(lt03.residual), abs(lt06.residual), abs(lt06.aux))
    return worst < 1e-4, 'max residual {:.2e}'.format(worst)


@register('legendre/involution')
def check_involution():
    pi = np.linspace(0.5, 5.0, 2001)
    p, g = value_fn.legendre_transform(pi, np.log(pi))
    x, f = value_fn.legendre_transform(p, g)
    worst = max(float(np.max(np.abs(x - pi))), float(np.max(np.abs(f - np.log(pi)))))
    return worst < 1e-3, 'max deviation {:.2e}'.format(worst)


@register('solver/boundaries-and-bounds')
def check_solver():
    grid = Grid.for_horizon(40, 0.5)
    surface = solver.solve_stop_loss(solver.StopLossProblem(grid=grid))
    u, z = surface.values, surface.z
    exact = bool(np.all(u[:, 0] == 1.0) and np.all(u[:, -1] == 0.0) and np.all(u[0, :-1] == 1.0))
    boxed = bool(np.all(u >= (1.0 - z) - 1e-12) and np.all(u <= 1.0 + 1e-12))
    return exact and boxed, 'boundaries exact: {}, within [1 - z, 1]: {}'.format(exact, boxed)


@register('multi-asset/kelly-identities')
def check_multi_asset():
    mp = MultiAssetParams(excess=[0.1, 0.2], C=np.diag([0.04, 0.04]))
    weights = kelly_weights(mp)
    stats = kelly_portfolio_stats(mp)
    inner = derive_params(kelly_market_params(mp)).alpha_K
    passed = np.allclose(weights, [2.5, 5.0]) and math.isclose(stats.mu_K, 1.25) \
        and math.isclose(stats.sigma_K ** 2, stats.mu_K) and math.isclose(inner, 1.0)
    return passed, 'weights {}, mu_K {:g}, Kelly-into-Kelly {:g}'.format(
        weights.tolist(), stats.mu_K, inner)


@register('var-cap')
def check_var_cap():
    capped = apply_var_cap(1.0, 0.30, 1.0)
    return math.isclose(capped, 0.3) and apply_var_cap(capped, 0.30, 1.0) == capped, \
        'u=1 capped to {:g}'.format(capped)


@register('monte-carlo/kelly-growth')
def check_monte_carlo():
    cfg = SimConfig(n_paths=20_000, n_steps=4, seed=7, T=2.0)
    result = simulate(cfg, DP, ConstantStrategy(DP.alpha_K))
    gap = abs(result.mean_log_growth - 1.0)
    return gap <= 3 * result.std_error, 'growth {:.4f} +/- {:.4f}'.format(
        result.mean_log_growth, result.std_error)
