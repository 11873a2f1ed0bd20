"""Closed-form strategies and value functions used as oracles.

Each variant is a small class in the style of a storage backend: the base class lists every
operation and raises ``NotImplementedError`` for the ones a variant has no closed form for.
"""
import enum
import logging
import typing

import numpy as np
from scipy import special, stats

from kelly_stop.core import DerivedParams, DomainError, ParameterError
from kelly_stop.utils import ArrayLike, KellyStopError, as_result, central_diff, \
    default_step, second_diff

log = logging.getLogger(__name__)


class UnsupportedVariantError(KellyStopError):
    pass


class StrategyKind(enum.Enum):
    free_kelly = 'free-kelly'
    crra = 'crra'
    terminal_stop = 'terminal-stop'
    drawdown = 'drawdown'
    browne_target = 'browne-target'


class StrategyState(typing.NamedTuple):
    pi: ArrayLike
    t: ArrayLike
    # High-water mark, only read by the drawdown variant.
    m: typing.Optional[ArrayLike] = None


def normal_cdf(x):
    return special.ndtr(x)


def normal_ppf(q):
    return special.ndtri(q)


def normal_pdf(x):
    return stats.norm.pdf(x)


def _growth(dp: DerivedParams, T: float, t: ArrayLike):
    """(mu - r)^2 (T - t) / (2 sigma^2), i.e. the scaled time remaining."""
    return dp.sharpe ** 2 * (T - np.asarray(t, dtype=float)) / 2.0


def _positive(pi: ArrayLike) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0):
        raise DomainError('Portfolio value must be positive')
    return pi


class AnalyticStrategy:
    kind: StrategyKind
    time_dependent = False

    def fraction(self, state: StrategyState, dp: DerivedParams, T: float) -> ArrayLike:
        """Fraction alpha of the portfolio held in the risky asset at ``state``."""
        raise NotImplementedError()

    def value(self, pi: ArrayLike, t: ArrayLike, dp: DerivedParams, T: float) -> ArrayLike:
        """Value function J(pi, t); equals :meth:`terminal_reward` at t = T."""
        raise UnsupportedVariantError('{} has no closed-form value function'.format(self))

    def terminal_reward(self, pi: ArrayLike) -> ArrayLike:
        raise UnsupportedVariantError('{} has no terminal reward'.format(self))

    def scaled_fraction(self, z: ArrayLike, theta: ArrayLike) -> ArrayLike:
        """The strategy as a fraction u of free Kelly in scaled (z, theta) variables."""
        raise NotImplementedError()

    def cppi_coefficients(self, dp: DerivedParams) -> typing.Tuple[float, float]:
        """(A, B) with alpha(pi) = A + B / pi, for time independent variants."""
        raise UnsupportedVariantError('{} is not time independent'.format(self))

    def legendre_value(self, p: ArrayLike, t: ArrayLike, dp: DerivedParams, T: float):
        """Transformed value K(p, t) with J(pi, t) + K(p, t) = p pi and p = d_pi J."""
        raise UnsupportedVariantError('{} has no closed-form transformed value'.format(self))

    def legendre_investment(self, p: ArrayLike, t: ArrayLike, dp: DerivedParams, T: float):
        """Transformed investment phi(p, t) = gamma(pi, t)."""
        raise UnsupportedVariantError('{} has no closed-form transformed investment'.format(self))

    def invested_amount(self, state: StrategyState, dp: DerivedParams, T: float) -> ArrayLike:
        return as_result(np.asarray(state.pi, dtype=float) * self.fraction(state, dp, T))

    def __str__(self):
        return self.kind.value


class FreeKelly(AnalyticStrategy):
    kind = StrategyKind.free_kelly

    def fraction(self, state, dp, T):
        pi = _positive(state.pi)
        return as_result(np.full_like(pi, dp.alpha_K))

    def value(self, pi, t, dp, T):
        return as_result(np.log(_positive(pi)) + _growth(dp, T, t))

    def terminal_reward(self, pi):
        return as_result(np.log(_positive(pi)))

    def scaled_fraction(self, z, theta):
        return as_result(np.ones(np.broadcast(np.asarray(z), np.asarray(theta)).shape))

    def cppi_coefficients(self, dp):
        return dp.alpha_K, 0.0

    def legendre_value(self, p, t, dp, T):
        return as_result(1.0 + np.log(_positive(p)) - _growth(dp, T, t))

    def legendre_investment(self, p, t, dp, T):
        return as_result(dp.alpha_K / _positive(p))


class CRRA(AnalyticStrategy):
    """Power utility pi^eta / eta; eta -> 0 is the log (free Kelly) limit."""
    kind = StrategyKind.crra

    def __init__(self, eta: float):
        if not eta < 1:
            raise ParameterError('CRRA needs eta < 1, got {}'.format(eta))
        self.eta = eta

    @classmethod
    def from_fraction(cls, kappa: float) -> 'CRRA':
        """Fractional Kelly kappa * alpha_K is the CRRA optimum for eta = 1 - 1/kappa."""
        if not kappa > 0:
            raise ParameterError('Kelly fraction must be positive, got {}'.format(kappa))
        return cls(1.0 - 1.0 / kappa)

    @property
    def multiple(self) -> float:
        return 1.0 / (1.0 - self.eta)

    def _time_factor(self, t, dp, T):
        return np.exp(_growth(dp, T, t) * self.eta / (1.0 - self.eta))

    def fraction(self, state, dp, T):
        pi = _positive(state.pi)
        return as_result(np.full_like(pi, dp.alpha_K * self.multiple))

    def value(self, pi, t, dp, T):
        pi = _positive(pi)
        if self.eta == 0:
            return FreeKelly().value(pi, t, dp, T)
        return as_result(pi ** self.eta / self.eta * self._time_factor(t, dp, T))

    def terminal_reward(self, pi):
        pi = _positive(pi)
        if self.eta == 0:
            return as_result(np.log(pi))
        return as_result(pi ** self.eta / self.eta)

    def scaled_fraction(self, z, theta):
        return as_result(np.full(np.broadcast(np.asarray(z), np.asarray(theta)).shape,
                                 self.multiple))

    def cppi_coefficients(self, dp):
        return dp.alpha_K * self.multiple, 0.0

    def legendre_value(self, p, t, dp, T):
        p = _positive(p)
        if self.eta == 0:
            return FreeKelly().legendre_value(p, t, dp, T)
        eta = self.eta
        factor = self._time_factor(t, dp, T) ** (1.0 / (1.0 - eta))
        return as_result((eta - 1.0) / eta * factor * p ** (eta / (eta - 1.0)))

    def legendre_investment(self, p, t, dp, T):
        p = _positive(p)
        pi = (p / self._time_factor(t, dp, T)) ** (1.0 / (self.eta - 1.0))
        return as_result(dp.alpha_K * self.multiple * pi)

    def __str__(self):
        return 'crra(eta={})'.format(self.eta)


class TerminalStop(AnalyticStrategy):
    """Free Kelly on the capital above a floor ``pi_c`` that must never be breached (CPPI)."""
    kind = StrategyKind.terminal_stop

    def __init__(self, pi_c: float):
        if not pi_c > 0:
            raise ParameterError('Stop level must be positive, got {}'.format(pi_c))
        self.pi_c = pi_c

    def _check(self, pi, strict=False):
        pi = np.asarray(pi, dtype=float)
        below = pi <= self.pi_c if strict else pi < self.pi_c
        if np.any(below):
            raise DomainError('Portfolio value is below the stop level {}'.format(self.pi_c))
        return pi

    def fraction(self, state, dp, T):
        pi = self._check(state.pi)
        return as_result(dp.alpha_K * (1.0 - self.pi_c / pi))

    def value(self, pi, t, dp, T):
        pi = self._check(pi, strict=True)
        return as_result(np.log(pi - self.pi_c) + _growth(dp, T, t))

    def terminal_reward(self, pi):
        return as_result(np.log(self._check(pi, strict=True) - self.pi_c))

    def scaled_fraction(self, z, theta):
        z, _ = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(theta, dtype=float))
        return as_result(1.0 - z)

    def cppi_coefficients(self, dp):
        return dp.alpha_K, -dp.alpha_K * self.pi_c

    def legendre_value(self, p, t, dp, T):
        p = _positive(p)
        return as_result(1.0 + np.log(p) + self.pi_c * p - _growth(dp, T, t))

    def legendre_investment(self, p, t, dp, T):
        return as_result(dp.alpha_K / _positive(p))

    def __str__(self):
        return 'terminal-stop(pi_c={})'.format(self.pi_c)


class Drawdown(AnalyticStrategy):
    """Free Kelly on the excess over the trailing floor ``lam * m``."""
    kind = StrategyKind.drawdown

    def __init__(self, lam: float):
        if not 0 <= lam < 1:
            raise ParameterError('Drawdown fraction must lie in [0, 1), got {}'.format(lam))
        self.lam = lam

    def fraction(self, state, dp, T):
        if state.m is None:
            raise DomainError('The drawdown strategy needs the high-water mark m')
        pi = _positive(state.pi)
        m = np.asarray(state.m, dtype=float)
        if np.any(pi < self.lam * m) or np.any(pi > m):
            raise DomainError('Portfolio value must lie between lam*m and m')
        return as_result(dp.alpha_K * (1.0 - self.lam * m / pi))

    def __str__(self):
        return 'drawdown(lam={})'.format(self.lam)


class BrowneTarget(AnalyticStrategy):
    """Maximise the probability of reaching ``b`` by T.

    At or above the target the portfolio sits in the risk-free asset (alpha = 0, J = 1);
    pass ``hold_above_target=False`` to reject such states instead.
    """
    kind = StrategyKind.browne_target
    time_dependent = True

    def __init__(self, b: float, hold_above_target: bool = True):
        if not b > 1:
            raise ParameterError('Target level must exceed 1, got {}'.format(b))
        self.b = b
        self.hold_above_target = hold_above_target

    def _check(self, pi, t, T, allow_terminal=False):
        pi = _positive(pi)
        t = np.asarray(t, dtype=float)
        if not self.hold_above_target and np.any(pi > self.b):
            raise DomainError('Portfolio value is above the target {}'.format(self.b))
        if np.any(t > T) or (not allow_terminal and np.any(t >= T)):
            raise DomainError('The target strategy is defined for t < T')
        return pi, t

    def fraction(self, state, dp, T):
        if dp.alpha_K <= 0:
            raise ParameterError('The target strategy needs a positive risk premium')
        pi, t = self._check(state.pi, state.t, T)
        z = self.b / np.minimum(pi, self.b)
        theta = (T - t) / dp.tau
        return as_result(dp.alpha_K * separable_strategy(z, theta))

    def value(self, pi, t, dp, T):
        pi, t = self._check(pi, t, T, allow_terminal=True)
        ratio = np.minimum(pi / self.b, 1.0)
        return as_result(normal_cdf(normal_ppf(ratio) + dp.sharpe * np.sqrt(T - t)))

    def terminal_reward(self, pi):
        return as_result(np.minimum(_positive(pi) / self.b, 1.0))

    def scaled_fraction(self, z, theta):
        return separable_strategy(z, theta)

    def __str__(self):
        return 'browne-target(b={})'.format(self.b)


def eval_strategy(s: AnalyticStrategy, state: StrategyState, dp: DerivedParams, T: float):
    return s.fraction(state, dp, T)


def eval_value(s: AnalyticStrategy, pi: ArrayLike, t: ArrayLike, dp: DerivedParams, T: float):
    return s.value(pi, t, dp, T)


def separable_f(z: ArrayLike) -> ArrayLike:
    """f(z) = z phi(Phi^-1(1/z)), the separable factor of the target strategy."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 1):
        raise DomainError('separable_f is defined for z >= 1')
    return as_result(z * normal_pdf(normal_ppf(1.0 / z)))


def separable_strategy(z: ArrayLike, theta: ArrayLike, lam: float = 2.0, c: float = 0.0):
    """Separable solution u = f(z) / sqrt(lam theta + c) of the scaled strategy equation."""
    denom = lam * np.asarray(theta, dtype=float) + c
    if np.any(denom <= 0):
        raise DomainError('lam*theta + c must be positive')
    return as_result(separable_f(z) / np.sqrt(denom))


def separable_ode_residual(f: typing.Callable, lam: float, z: float, h: float = None) -> float:
    """f''(z) + lam / (2 z^2 f(z)) by central differences."""
    h = h or default_step(z)
    fz = f(z)
    if fz == 0:
        raise DomainError('f({}) = 0, the separable ODE is singular there'.format(z))
    return float(second_diff(f, z, h) + lam / (2.0 * z * z * fz))


def selfsimilar_ode_residual(F: typing.Callable, lam: float, x: float, h: float = None) -> float:
    """F(x)^2 F''(x) + lam x F'(x) / 2 by central differences."""
    h = h or default_step(x)
    return float(F(x) ** 2 * second_diff(F, x, h) + 0.5 * lam * x * central_diff(F, x, h))


def sigma_max_from_var(var_limit: float, confidence: float = 0.95, horizon_days: float = 1.0,
                       trading_days: float = 252.0) -> float:
    """Annual volatility ceiling implied by a parametric VaR limit."""
    if not 0 < confidence < 1:
        raise ParameterError('VaR confidence must lie in (0, 1), got {}'.format(confidence))
    if not var_limit > 0:
        raise ParameterError('VaR limit must be positive, got {}'.format(var_limit))
    return float(var_limit / (normal_ppf(confidence) * np.sqrt(horizon_days / trading_days)))
