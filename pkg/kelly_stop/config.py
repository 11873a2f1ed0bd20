import dataclasses
import logging
import math
import pathlib
import typing

from kelly_stop.core import (
    DEFAULT_STABILITY_RATIO,
    DerivedParams,
    Grid,
    MarketParams,
    ParameterError,
    derive_params,
)
from kelly_stop.simulate import STEPS_PER_MONTH, SimConfig
from kelly_stop.solver import StopLossProblem
from kelly_stop.utils import KellyStopError, period_to_years

log = logging.getLogger(__name__)

SETTING_PREFIX = 'KELLYSTOP_'


class ConfigError(KellyStopError):
    pass


class DefaultProfile(object):
    KELLYSTOP_SHARPE = 1.0
    KELLYSTOP_SIGMA = 0.10
    KELLYSTOP_R = 0.0
    KELLYSTOP_PERIOD = '1m'
    KELLYSTOP_STOP_DELTA = 0.05
    KELLYSTOP_NZ = 200
    KELLYSTOP_STABILITY_RATIO = DEFAULT_STABILITY_RATIO
    KELLYSTOP_PATHS = 100_000
    KELLYSTOP_STEPS_PER_MONTH = STEPS_PER_MONTH
    KELLYSTOP_SEED = 42
    KELLYSTOP_THREADS = 1
    KELLYSTOP_FORMAT = 'csv'
    KELLYSTOP_OUT = '.'

    @classmethod
    def settings(cls) -> typing.Dict[str, typing.Any]:
        """Defaults keyed like the CLI options they feed, e.g. ``stop_delta``."""
        return {
            name[len(SETTING_PREFIX):].lower(): getattr(cls, name)
            for name in dir(cls) if name.startswith(SETTING_PREFIX)
        }


class TestProfile(DefaultProfile):
    KELLYSTOP_NZ = 40
    KELLYSTOP_PATHS = 2_000
    KELLYSTOP_STEPS_PER_MONTH = 50


def load_config_file(path: typing.Union[str, pathlib.Path]) -> typing.Dict[str, str]:
    """Read a flat ``key = value`` recipe; keys are CLI flag names, ``#`` starts a comment.

    Values stay strings so that click converts them exactly as it would the flags.
    """
    values = {}
    text = pathlib.Path(path).read_text(encoding='utf-8')
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip().lstrip('-').replace('-', '_')
        if not sep or not key:
            raise ConfigError('{}:{}: expected "key = value"'.format(path, lineno))
        values[key] = value.strip()
    log.debug('Loaded {} settings from {}'.format(len(values), path))
    return values


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """A validated experiment recipe, built from CLI options."""
    market: MarketParams
    stop_delta: float
    period: float
    nz: int
    dtheta: typing.Optional[float] = None
    theta_max: typing.Optional[float] = None
    stability_ratio: float = DEFAULT_STABILITY_RATIO
    paths: int = DefaultProfile.KELLYSTOP_PATHS
    steps: typing.Optional[int] = None
    steps_per_month: int = STEPS_PER_MONTH
    seed: int = DefaultProfile.KELLYSTOP_SEED
    threads: int = 1
    var_cap: typing.Optional[float] = None

    def __post_init__(self):
        self.market.validate()
        if not 0 < self.stop_delta < 1:
            raise ParameterError('Stop distance must lie in (0, 1), got {}'.format(
                self.stop_delta))
        if self.var_cap is not None and not self.var_cap > 0:
            raise ParameterError('VaR cap must be positive, got {}'.format(self.var_cap))
        if self.theta_max is not None and not self.theta_max > 0:
            raise ParameterError('theta_max must be positive, got {}'.format(self.theta_max))
        # Fails early on an unstable grid.
        self.grid()

    @classmethod
    def from_options(cls, mu=None, r=0.0, sigma=DefaultProfile.KELLYSTOP_SIGMA,
                     sharpe=DefaultProfile.KELLYSTOP_SHARPE,
                     period=DefaultProfile.KELLYSTOP_PERIOD, **kwargs) -> 'RunConfig':
        if mu is not None:
            market = MarketParams(mu=mu, r=r, sigma=sigma)
        else:
            market = MarketParams.from_sharpe(sharpe, sigma, r=r)
        return cls(market=market, period=period_to_years(period), **kwargs)

    @property
    def dp(self) -> DerivedParams:
        return derive_params(self.market)

    @property
    def pi_c(self) -> float:
        return 1.0 - self.stop_delta

    @property
    def horizon(self) -> float:
        """Scaled length of the solve, one reset period unless overridden."""
        return self.theta_max if self.theta_max is not None else self.period / self.dp.tau

    def grid(self) -> Grid:
        if self.dtheta is not None:
            # Shrink the step so the march ends exactly on the horizon.
            ntheta = max(1, math.ceil(self.horizon / self.dtheta - 1e-9))
            return Grid(nz=self.nz, dtheta=self.horizon / ntheta, ntheta=ntheta)
        return Grid.for_horizon(self.nz, self.horizon, self.stability_ratio)

    def problem(self) -> StopLossProblem:
        if self.dp.alpha_K <= 0:
            raise ParameterError('The stop-loss problem needs mu > r (alpha_K = {})'.format(
                self.dp.alpha_K))
        return StopLossProblem(grid=self.grid())

    def sim_config(self, stop: bool = True) -> SimConfig:
        n_steps = self.steps or max(1, math.ceil(self.steps_per_month * 12 * self.period))
        return SimConfig(n_paths=self.paths, n_steps=n_steps, seed=self.seed, T=self.period,
                         pi_c=self.pi_c if stop else 0.0, workers=self.threads)

    def as_dict(self):
        return {
            'mu': self.market.mu,
            'r': self.market.r,
            'sigma': self.market.sigma,
            'stop_delta': self.stop_delta,
            'pi_c': self.pi_c,
            'period': self.period,
            'alpha_K': self.dp.alpha_K,
            'sharpe': self.dp.sharpe,
            'tau': self.dp.tau,
        }
