"""Shared domain types and the (pi, t) <-> (z, theta) scalings."""
import dataclasses
import enum
import functools
import logging
import math
import typing

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from kelly_stop.utils import ArrayLike, KellyStopError, as_result

log = logging.getLogger(__name__)

# Explicit Euler bound on dtheta/dz^2, valid while u^2 z^2 <= 1.
MAX_STABILITY_RATIO = 0.5
DEFAULT_STABILITY_RATIO = 0.4


class ParameterError(KellyStopError, ValueError):
    pass


class DomainError(KellyStopError, ValueError):
    pass


class StabilityError(KellyStopError, ValueError):
    pass


class MarketParams(typing.NamedTuple):
    """Drift ``mu`` and risk-free rate ``r`` per year, volatility ``sigma`` per sqrt(year)."""
    mu: float
    r: float
    sigma: float

    @classmethod
    def from_sharpe(cls, sharpe: float, sigma: float, r: float = 0.0) -> 'MarketParams':
        return cls(mu=r + sharpe * sigma, r=r, sigma=sigma)

    def validate(self) -> 'MarketParams':
        if not self.sigma > 0:
            raise ParameterError('sigma must be positive, got {}'.format(self.sigma))
        if self.mu == self.r:
            raise ParameterError('mu equals r ({}); the Kelly fraction and the characteristic '
                                 'time are undefined'.format(self.mu))
        return self


class DerivedParams(typing.NamedTuple):
    alpha_K: float
    sharpe: float
    tau: float


class ScaledState(typing.NamedTuple):
    z: ArrayLike
    theta: ArrayLike


class ProblemKind(enum.Enum):
    stop_loss = 'stop-loss'
    target = 'target'
    generic = 'generic'


def derive_params(p: MarketParams) -> DerivedParams:
    p.validate()
    excess = p.mu - p.r
    sharpe = excess / p.sigma
    return DerivedParams(
        alpha_K=sharpe / p.sigma,
        sharpe=sharpe,
        tau=2.0 / sharpe ** 2,
    )


def to_scaled(
    pi: ArrayLike, t: ArrayLike, pi_c: float, T: float, dp: DerivedParams
) -> ScaledState:
    pi = np.asarray(pi, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(pi <= 0):
        raise DomainError('Portfolio value must be positive')
    if pi_c <= 0:
        raise DomainError('Reference level pi_c must be positive, got {}'.format(pi_c))
    if np.any(t < 0) or np.any(t > T):
        raise DomainError('Time must lie in [0, {}]'.format(T))
    return ScaledState(z=as_result(pi_c / pi), theta=as_result((T - t) / dp.tau))


def from_scaled(st: ScaledState, pi_c: float, T: float, dp: DerivedParams):
    z = np.asarray(st.z, dtype=float)
    if np.any(z <= 0):
        raise DomainError('z = 0 corresponds to an infinite portfolio value')
    return as_result(pi_c / z), as_result(T - np.asarray(st.theta, dtype=float) * dp.tau)


@dataclasses.dataclass(frozen=True)
class Grid:
    """Uniform z nodes on [0, 1] (``nz`` interior nodes) marched ``ntheta`` steps of ``dtheta``."""
    nz: int
    dtheta: float
    ntheta: int

    def __post_init__(self):
        if self.nz < 1:
            raise ParameterError('nz must be at least 1, got {}'.format(self.nz))
        if self.ntheta < 1:
            raise ParameterError('ntheta must be at least 1, got {}'.format(self.ntheta))
        if not self.dtheta > 0:
            raise ParameterError('dtheta must be positive, got {}'.format(self.dtheta))
        if self.stability_ratio > MAX_STABILITY_RATIO * (1 + 1e-12):
            raise StabilityError(
                'dtheta/dz^2 = {:.6g} exceeds the explicit Euler bound {}'.format(
                    self.stability_ratio, MAX_STABILITY_RATIO)
            )

    @classmethod
    def for_horizon(cls, nz: int, theta_max: float, ratio: float = DEFAULT_STABILITY_RATIO):
        if not theta_max > 0:
            raise ParameterError('theta_max must be positive, got {}'.format(theta_max))
        if not 0 < ratio <= MAX_STABILITY_RATIO:
            raise StabilityError('Stability ratio must lie in (0, {}], got {}'.format(
                MAX_STABILITY_RATIO, ratio))
        dz = 1.0 / (nz + 1)
        ntheta = max(1, math.ceil(theta_max / (ratio * dz * dz)))
        return cls(nz=nz, dtheta=theta_max / ntheta, ntheta=ntheta)

    @property
    def dz(self) -> float:
        return 1.0 / (self.nz + 1)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nz + 2)

    @property
    def stability_ratio(self) -> float:
        return self.dtheta / self.dz ** 2

    @property
    def theta_max(self) -> float:
        return self.ntheta * self.dtheta

    def as_dict(self):
        return {
            'nz': self.nz,
            'dz': self.dz,
            'dtheta': self.dtheta,
            'ntheta': self.ntheta,
            'theta_max': self.theta_max,
            'stability_ratio': self.stability_ratio,
        }


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclasses.dataclass(frozen=True, eq=False)
class StrategySurface:
    """Scaled strategy u(z, theta) stored on the stored theta planes of a solve.

    ``values[j, i]`` is u at ``thetas[j]`` and ``grid.z[i]``, boundary nodes included.
    """
    grid: Grid
    thetas: np.ndarray
    values: np.ndarray
    problem: ProblemKind = ProblemKind.generic

    # Slack for the [0, 1] bounds of stop-loss surfaces.
    bound_tolerance: typing.ClassVar[float] = 1e-12

    def __post_init__(self):
        object.__setattr__(self, 'thetas', _frozen_array(self.thetas))
        object.__setattr__(self, 'values', _frozen_array(self.values))

        if self.values.shape != (len(self.thetas), self.grid.nz + 2):
            raise ParameterError('values has shape {}, expected {}'.format(
                self.values.shape, (len(self.thetas), self.grid.nz + 2)))
        if np.any(np.diff(self.thetas) <= 0):
            raise ParameterError('Stored theta planes must be strictly increasing')
        if not np.all(np.isfinite(self.values)):
            raise ParameterError('Strategy surface contains non-finite values')

        if self.problem is ProblemKind.stop_loss:
            tol = self.bound_tolerance
            if self.values.min() < -tol or self.values.max() > 1 + tol:
                raise ParameterError('Stop-loss strategy must stay within [0, 1]')
            if np.any(self.values[:, 0] != 1.0) or np.any(self.values[:, -1] != 0.0):
                raise ParameterError('Stop-loss strategy must satisfy u(0, theta) = 1 and '
                                     'u(1, theta) = 0')

    @classmethod
    def from_function(cls, grid: Grid, thetas, fn: typing.Callable, problem=ProblemKind.generic):
        """Tabulate ``fn(z, theta)`` (vectorised) on the grid nodes and given planes."""
        thetas = np.asarray(thetas, dtype=float)
        zz, tt = np.meshgrid(grid.z, thetas)
        return cls(grid=grid, thetas=thetas, values=np.broadcast_to(fn(zz, tt), zz.shape),
                   problem=problem)

    @property
    def z(self) -> np.ndarray:
        return self.grid.z

    @property
    def theta_max(self) -> float:
        return float(self.thetas[-1])

    @functools.cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator((self.thetas, self.grid.z), self.values, method='linear')

    def interpolate(self, z: ArrayLike, theta: ArrayLike) -> ArrayLike:
        """Bilinear u(z, theta); queries outside the stored box are clamped onto it."""
        z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
        theta = np.clip(np.asarray(theta, dtype=float), self.thetas[0], self.thetas[-1])
        z, theta = np.broadcast_arrays(z, theta)
        if len(self.thetas) == 1:
            return as_result(np.interp(z, self.grid.z, self.values[0]))
        points = np.stack([theta.ravel(), z.ravel()], axis=-1)
        return as_result(self._interpolator(points).reshape(z.shape))

    def metadata(self):
        return {
            'problem': self.problem.value,
            'grid': self.grid.as_dict(),
            'stored_planes': len(self.thetas),
        }
