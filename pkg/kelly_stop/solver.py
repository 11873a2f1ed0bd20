"""Explicit Euler solver for the scaled stop-loss strategy equation

    d_theta u = u^2 z^2 d_z^2 u,   u(0, theta) = 1,  u(1, theta) = 0,  u(z, 0) = 1,

plus finite-difference residual operators for the equivalent forms of the equation.
"""
import enum
import logging
import math
import typing

import arrow
import numpy as np
from scipy.interpolate import CubicSpline

from kelly_stop.core import (
    DEFAULT_STABILITY_RATIO,
    DerivedParams,
    DomainError,
    Grid,
    ParameterError,
    ProblemKind,
    StrategySurface,
)
from kelly_stop.utils import KellyStopError, NumericalInstabilityError, numerics_guard, \
    observed_order, period_to_years

log = logging.getLogger(__name__)

# Stored planes kept by default; every other plane can be recomputed.
DEFAULT_STORED_PLANES = 1000
# Slack on the box 1 - z <= u <= 1 before a stored plane counts as unstable.
BOX_TOLERANCE = 1e-9


class SolverInstabilityError(NumericalInstabilityError):
    pass


class SliceRangeError(KellyStopError, ValueError):
    pass


class StopLossProblem(typing.NamedTuple):
    grid: Grid
    # Keep every ``stride``-th theta plane (the last plane is always kept).
    stride: typing.Optional[int] = None

    @classmethod
    def for_market(cls, dp: DerivedParams, period, nz: int,
                   ratio: float = DEFAULT_STABILITY_RATIO, stride: int = None):
        """The problem covering one reset period of length ``period`` (years or '1m' style)."""
        if dp.alpha_K <= 0:
            raise ParameterError('The stop-loss problem needs mu > r (alpha_K = {})'.format(
                dp.alpha_K))
        return cls(grid=Grid.for_horizon(nz, theta_span(period, dp), ratio), stride=stride)

    @property
    def theta_max(self) -> float:
        return self.grid.theta_max

    @property
    def plane_stride(self) -> int:
        if self.stride is not None:
            if self.stride < 1:
                raise ParameterError('stride must be at least 1, got {}'.format(self.stride))
            return self.stride
        return default_stride(self.grid.ntheta)


class ResidualReport(typing.NamedTuple):
    x: float
    t: float
    residual: float
    h_x: float
    h_t: float
    aux: typing.Optional[float] = None


class SliceMode(enum.Enum):
    fixed_z = 'fixed-z'
    fixed_theta = 'fixed-theta'
    fixed_delta = 'fixed-delta'

    @classmethod
    def as_mode(cls, value):
        if isinstance(value, cls):
            return value
        return cls(value)


class Slice(typing.NamedTuple):
    mode: SliceMode
    value: float
    # theta for fixed-z/fixed-delta slices, z for fixed-theta slices.
    coord: np.ndarray
    u: np.ndarray


class Region(enum.Enum):
    dead = 'dead-zone'
    transition = 'transition'
    free = 'free-kelly'


class ConvergenceReport(typing.NamedTuple):
    nz: typing.Tuple[int, ...]
    differences: typing.Tuple[float, ...]
    orders: typing.Tuple[float, ...]

    @property
    def order(self) -> float:
        return self.orders[-1]


def _advance(row: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """One Euler step of the interior nodes; ``coef`` is dtheta z_i^2 / dz^2 per interior node."""
    inner = row[1:-1]
    out = row.copy()
    out[1:-1] = inner + coef * inner * inner * (row[2:] - 2.0 * inner + row[:-2])
    return out


def step_explicit_euler(row: np.ndarray, dtheta: float, dz: float) -> np.ndarray:
    """Advance ``row`` (nodes z_i = i dz, boundaries included) by one step of ``dtheta``.

    The boundary values of ``row`` are carried over unchanged.
    """
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or len(row) < 3:
        raise ParameterError('A row needs at least one interior node')
    z = np.arange(len(row)) * dz
    return _advance(row, dtheta / dz ** 2 * z[1:-1] ** 2)


@numerics_guard
def _march(problem: StopLossProblem):
    grid = problem.grid
    stride = problem.plane_stride
    coef = grid.stability_ratio * grid.z[1:-1] ** 2
    floor = 1.0 - grid.z - BOX_TOLERANCE

    row = np.ones(grid.nz + 2)
    # The stop boundary wins at the (z=1, theta=0) corner.
    row[-1] = 0.0

    thetas = [0.0]
    planes = [row]
    for n in range(1, grid.ntheta + 1):
        row = _advance(row, coef)
        if n % stride == 0 or n == grid.ntheta:
            if not np.all(np.isfinite(row)):
                raise SolverInstabilityError(
                    'Non-finite strategy at step {} (theta = {:.6g}); stability ratio {:.6g}'
                    .format(n, n * grid.dtheta, grid.stability_ratio))
            if np.any(row < floor) or np.any(row > 1.0 + BOX_TOLERANCE):
                raise SolverInstabilityError(
                    'Strategy left the box [1 - z, 1] at step {} (theta = {:.6g}); stability '
                    'ratio {:.6g}'.format(n, n * grid.dtheta, grid.stability_ratio))
            thetas.append(n * grid.dtheta)
            planes.append(row)
    return np.array(thetas), np.vstack(planes)


def solve_stop_loss(p: StopLossProblem) -> StrategySurface:
    grid = p.grid
    log.info('Solving stop-loss problem: nz={} ntheta={} dtheta={:.6g} ratio={:.4f}'.format(
        grid.nz, grid.ntheta, grid.dtheta, grid.stability_ratio))
    started = arrow.utcnow()
    try:
        thetas, values = _march(p)
    except NumericalInstabilityError as e:
        if isinstance(e, SolverInstabilityError):
            raise
        raise SolverInstabilityError(str(e)) from e
    log.debug('Stored {} theta planes in {:.2f}s'.format(
        len(thetas), (arrow.utcnow() - started).total_seconds()))
    return StrategySurface(grid=grid, thetas=thetas, values=values, problem=ProblemKind.stop_loss)


def _dt(fn, x, t, h):
    return (fn(x, t + h) - fn(x, t - h)) / (2.0 * h)


def _d2x(fn, x, t, h):
    return (fn(x + h, t) - 2.0 * fn(x, t) + fn(x - h, t)) / (h * h)


def _check_steps(*steps):
    for h in steps:
        if not h > 0:
            raise ParameterError('Stencil spacing must be positive, got {}'.format(h))


def pde_residual_alpha(alpha: typing.Callable, sigma: float, point, h_pi: float,
                       h_t: float) -> ResidualReport:
    """Residual of d_t alpha + (sigma^2/2) alpha^2 d_pi(pi^2 d_pi alpha) at ``point`` = (pi, t)."""
    _check_steps(h_pi, h_t)
    pi, t = point
    a0 = alpha(pi, t)
    up = (pi + h_pi / 2.0) ** 2 * (alpha(pi + h_pi, t) - a0)
    down = (pi - h_pi / 2.0) ** 2 * (a0 - alpha(pi - h_pi, t))
    flux = (up - down) / (h_pi * h_pi)
    residual = _dt(alpha, pi, t, h_t) + 0.5 * sigma ** 2 * a0 ** 2 * flux
    return ResidualReport(x=pi, t=t, residual=float(residual), h_x=h_pi, h_t=h_t)


def pde_residual_gamma(gamma: typing.Callable, sigma: float, point, h: float) -> ResidualReport:
    """Residual of d_t gamma + (sigma^2/2) gamma^2 d_pi^2 gamma at ``point`` = (pi, t)."""
    _check_steps(h)
    pi, t = point
    residual = _dt(gamma, pi, t, h) \
        + 0.5 * sigma ** 2 * gamma(pi, t) ** 2 * _d2x(gamma, pi, t, h)
    return ResidualReport(x=pi, t=t, residual=float(residual), h_x=h, h_t=h)


def pde_residual_scaled(u: typing.Callable, point, h_z: float, h_theta: float) -> ResidualReport:
    """Residual of d_theta u - u^2 z^2 d_z^2 u at ``point`` = (z, theta)."""
    _check_steps(h_z, h_theta)
    z, theta = point
    residual = _dt(u, z, theta, h_theta) \
        - u(z, theta) ** 2 * z * z * _d2x(u, z, theta, h_z)
    return ResidualReport(x=z, t=theta, residual=float(residual), h_x=h_z, h_t=h_theta)


def pde_residual_w(w: typing.Callable, point, h_pi: float, h_theta: float) -> ResidualReport:
    """Residual of d_theta w - w^2 d_pi^2 w, the scaled amount w = gamma / alpha_K.

    ``point`` = (pi, theta).
    """
    _check_steps(h_pi, h_theta)
    pi, theta = point
    residual = _dt(w, pi, theta, h_theta) - w(pi, theta) ** 2 * _d2x(w, pi, theta, h_pi)
    return ResidualReport(x=pi, t=theta, residual=float(residual), h_x=h_pi, h_t=h_theta)


def self_financing_balance(surface: StrategySurface, dp: DerivedParams, point,
                           pi_c: float = 1.0) -> ResidualReport:
    """dt-coefficient of d gamma - (d_pi gamma) d pi reconstructed from a tabulated surface.

    ``point`` = (z, theta) is snapped to the nearest interior node and stored plane. With
    gamma = alpha_K pi u this coefficient equals -(alpha_K pi / tau) (u_theta - u^2 z^2 u_zz);
    the scaled residual is returned as ``aux``.
    """
    z_q, theta_q = point
    z, thetas, values = surface.z, surface.thetas, surface.values
    i = int(np.argmin(np.abs(z - z_q)))
    j = int(np.argmin(np.abs(thetas - theta_q)))
    if not 0 < i < len(z) - 1 or not 0 < j < len(thetas) - 1:
        raise DomainError('({}, {}) is not interior to the surface grid'.format(z_q, theta_q))

    dz = surface.grid.dz
    d_theta = thetas[j + 1] - thetas[j - 1]
    u = values[j, i]
    u_theta = (values[j + 1, i] - values[j - 1, i]) / d_theta
    u_zz = (values[j, i + 1] - 2.0 * u + values[j, i - 1]) / dz ** 2
    scaled = u_theta - u * u * z[i] ** 2 * u_zz

    pi = pi_c / z[i]
    defect = -dp.alpha_K * pi / dp.tau * scaled
    return ResidualReport(x=float(z[i]), t=float(thetas[j]), residual=float(defect), h_x=dz,
                          h_t=float(d_theta / 2.0), aux=float(scaled))


def extract_slice(surface: StrategySurface, mode, value: float, coords=None) -> Slice:
    """Bilinearly interpolated cut through ``surface``.

    ``fixed_delta`` cuts at z = 1 - delta, i.e. a portfolio ``delta`` above the stop level.
    ``coords`` overrides the sample points (default: the stored planes or the z nodes).
    """
    mode = SliceMode.as_mode(mode)
    value = float(value)

    if mode is SliceMode.fixed_theta:
        lo, hi = surface.thetas[0], surface.thetas[-1]
        if not lo <= value <= hi:
            raise SliceRangeError('theta = {} outside the solved range [{}, {}]'.format(
                value, lo, hi))
        coord = surface.z if coords is None else np.asarray(coords, dtype=float)
        return Slice(mode, value, coord, np.asarray(surface.interpolate(coord, value)))

    z = value if mode is SliceMode.fixed_z else 1.0 - value
    if not 0 <= z <= 1:
        raise SliceRangeError('{} = {} is outside the z range [0, 1]'.format(mode.value, value))
    coord = surface.thetas if coords is None else np.asarray(coords, dtype=float)
    return Slice(mode, value, coord, np.asarray(surface.interpolate(z, coord)))


def grid_convergence(nz_ladder=(50, 100, 200), theta_eval: float = 0.5, z_eval=None,
                     ratio: float = DEFAULT_STABILITY_RATIO) -> ConvergenceReport:
    """Richardson order estimate from solves on successively refined grids.

    Each solve ends exactly at ``theta_eval``; its final row is compared at ``z_eval`` (default
    0.05..0.9) through a cubic spline, so the grids need not share nodes.
    """
    if len(nz_ladder) < 3:
        raise ParameterError('A convergence ladder needs at least three grids')
    if z_eval is None:
        z_eval = np.linspace(0.05, 0.9, 18)
    z_eval = np.asarray(z_eval, dtype=float)

    rows = []
    for nz in nz_ladder:
        grid = Grid.for_horizon(nz, theta_eval, ratio)
        surface = solve_stop_loss(StopLossProblem(grid=grid, stride=grid.ntheta))
        rows.append(CubicSpline(surface.z, surface.values[-1])(z_eval))

    differences = tuple(float(np.max(np.abs(a - b))) for a, b in zip(rows, rows[1:]))
    steps = [1.0 / (nz + 1) for nz in nz_ladder[1:]]
    orders = tuple(observed_order(differences, steps))
    log.info('Grid convergence over nz={}: orders {}'.format(
        tuple(nz_ladder), ', '.join('{:.3f}'.format(o) for o in orders)))
    return ConvergenceReport(nz=tuple(nz_ladder), differences=differences, orders=orders)


def classify_regions(surface: StrategySurface, dead: float = 0.1,
                     free: float = 0.9) -> np.ndarray:
    """Label each node as dead zone (u < dead), free Kelly (u > free) or transition."""
    if not 0 <= dead < free <= 1:
        raise ParameterError('Need 0 <= dead < free <= 1, got {} and {}'.format(dead, free))
    return classify_values(surface.values, dead, free)


def classify_values(values, dead: float = 0.1, free: float = 0.9) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.select(
        [values < dead, values > free],
        [Region.dead.value, Region.free.value],
        default=Region.transition.value,
    )


def theta_span(period, dp: DerivedParams) -> float:
    """Scaled length of a reset period."""
    return period_to_years(period) / dp.tau


def default_stride(ntheta: int) -> int:
    return max(1, math.ceil(ntheta / DEFAULT_STORED_PLANES))
