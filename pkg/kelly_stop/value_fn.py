import dataclasses
import functools
import logging
import typing

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from kelly_stop.core import DerivedParams, DomainError, ParameterError, StrategySurface
from kelly_stop.solver import ResidualReport
from kelly_stop.utils import KellyStopError, default_step

log = logging.getLogger(__name__)

# |J''| below this is treated as a vanishing second derivative.
SINGULAR_THRESHOLD = 1e-12
# Relative slack when checking monotone finite-difference slopes.
SLOPE_TOLERANCE = 1e-12
# Largest log(pi d_pi J) integrated before exp() gets near overflow.
MAX_LOG_SLOPE = 500.0


class SingularDerivativeError(KellyStopError, ValueError):
    pass


class TransformError(KellyStopError, ValueError):
    pass


def _monotone_slopes(x, f):
    """+1 / -1 for strictly increasing / decreasing slopes, 0 otherwise."""
    slopes = np.diff(f) / np.diff(x)
    steps = np.diff(slopes)
    tol = SLOPE_TOLERANCE * max(np.max(np.abs(slopes)), 1.0)
    if np.all(steps > tol):
        return 1
    if np.all(steps < -tol):
        return -1
    return 0


@dataclasses.dataclass(frozen=True, eq=False)
class ValueCurve:
    """J sampled at increasing portfolio values; only defined up to an additive constant.

    ``anchor`` is the (pi_ref, J_ref) pair the constant was fixed by. ``truncated_at`` is the
    smallest portfolio value kept when the reconstruction had to stop short of the stop level.
    """
    pi: np.ndarray
    J: np.ndarray
    anchor: typing.Tuple[float, float]
    truncated_at: typing.Optional[float] = None

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        J = np.array(self.J, dtype=float)
        if pi.shape != J.shape or pi.ndim != 1 or len(pi) < 3:
            raise ParameterError('A value curve needs matching pi and J arrays of length >= 3')
        if np.any(np.diff(pi) <= 0):
            raise ParameterError('Value curve nodes must be strictly increasing in pi')
        if np.any(np.diff(J) <= 0):
            raise ParameterError('Value curve must be strictly increasing in pi')
        if _monotone_slopes(pi, J) != -1:
            raise ParameterError('Value curve must be concave in pi')
        object.__setattr__(self, 'pi', pi)
        object.__setattr__(self, 'J', J)

    @functools.cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.pi, self.J)

    def __call__(self, pi, t=None):
        """Spline through the nodes; ``t`` is ignored so the curve fits J(pi, t) call sites."""
        return self._spline(pi)

    def shifted(self, anchor: typing.Tuple[float, float]) -> 'ValueCurve':
        pi_ref, J_ref = anchor
        offset = J_ref - float(self(pi_ref))
        return dataclasses.replace(self, J=self.J + offset, anchor=(pi_ref, J_ref))

    def as_table(self) -> pd.DataFrame:
        return pd.DataFrame({'pi': self.pi, 'J': self.J})


class TransformPair(typing.NamedTuple):
    """Transformed value K and investment phi at p = d_pi J, stored in increasing pi order."""
    p: np.ndarray
    K: np.ndarray
    phi: typing.Optional[np.ndarray] = None

    def validate(self) -> 'TransformPair':
        if np.any(self.p <= 0):
            raise TransformError('p = d_pi J must be strictly positive')
        if np.any(np.diff(self.p) >= 0):
            raise TransformError('p must be strictly decreasing in pi for the transform to exist')
        return self


class LegendreDefects(typing.NamedTuple):
    identity: float
    slope: float
    time_slope: float
    curvature: float

    def max_abs(self) -> float:
        return max(abs(v) for v in self)


def _derivatives(J, pi, t, h):
    """J_t, J_pi, J_pipi by second-order central differences."""
    j0 = J(pi, t)
    jp, jm = J(pi + h, t), J(pi - h, t)
    J_t = (J(pi, t + h) - J(pi, t - h)) / (2.0 * h)
    return J_t, (jp - jm) / (2.0 * h), (jp - 2.0 * j0 + jm) / (h * h)


def _second(J, pi, t, h, threshold):
    J_t, J_pi, J_pipi = _derivatives(J, pi, t, h)
    if abs(J_pipi) < threshold:
        raise SingularDerivativeError('d_pi^2 J = {:.3g} vanishes at pi = {}'.format(J_pipi, pi))
    return J_t, J_pi, J_pipi


def hjb_residual(J: typing.Callable, dp: DerivedParams, point, h: float = None,
                 threshold: float = SINGULAR_THRESHOLD) -> ResidualReport:
    """Residual of d_t J - (alpha_K^2 sigma^2 / 2) (d_pi J)^2 / d_pi^2 J at (pi, t)."""
    pi, t = point
    h = h or default_step(pi)
    J_t, J_pi, J_pipi = _second(J, pi, t, h, threshold)
    residual = J_t - 0.5 * dp.sharpe ** 2 * J_pi ** 2 / J_pipi
    return ResidualReport(x=pi, t=t, residual=float(residual), h_x=h, h_t=h)


def strategy_from_value(J: typing.Callable, dp: DerivedParams, point, h: float = None,
                        threshold: float = SINGULAR_THRESHOLD) -> float:
    """Optimal fraction alpha = -alpha_K d_pi J / (pi d_pi^2 J) implied by a value function."""
    pi, t = point
    h = h or default_step(pi)
    _, J_pi, J_pipi = _second(J, pi, t, h, threshold)
    return float(-dp.alpha_K * J_pi / (pi * J_pipi))


def reconstruct_value(surface: StrategySurface, theta: float, anchor=None, pi_c: float = 1.0,
                      pi_range=None, floor: float = 1e-8) -> ValueCurve:
    """Value function at scaled time ``theta`` implied by the strategy ``surface``.

    In x = log pi the optimal control gives d log(pi d_pi J)/dx = 1 - 1/u. Starting from
    pi d_pi J -> 1 as z -> 0 this is integrated towards the stop level over the nodes where u
    exceeds ``floor``, then d_pi J is integrated once more to J. ``anchor`` defaults to J = 0 at
    the middle node.
    """
    if not pi_c > 0:
        raise DomainError('Stop level must be positive, got {}'.format(pi_c))
    z = surface.z
    u = np.asarray(surface.interpolate(z, theta))

    # Nodes from z = 0 up to the first one where u collapses onto the floor.
    collapsed = np.nonzero(u[1:] <= floor)[0]
    last = len(z) - 1 if len(collapsed) == 0 else int(collapsed[0])
    if last < 3:
        raise DomainError('Strategy is below the floor {} almost everywhere'.format(floor))
    z, u = z[:last + 1], u[:last + 1]

    g = np.empty_like(z)
    g[1:] = (1.0 / u[1:] - 1.0) / z[1:]
    g[0] = (1.0 - u[1]) / z[1]
    log_slope = cumulative_trapezoid(g, z, initial=0.0)
    blown = np.nonzero(log_slope > MAX_LOG_SLOPE)[0]
    if len(blown):
        last = int(blown[0]) - 1
        if last < 3:
            raise DomainError('Strategy is too close to zero to integrate a value function')
        z, log_slope = z[:last + 1], log_slope[:last + 1]

    # Increasing pi, dropping z = 0.
    pi = (pi_c / z[1:])[::-1]
    x = np.log(pi)
    J = cumulative_trapezoid(np.exp(log_slope[1:][::-1]), x, initial=0.0)

    truncated_at = None
    if last < len(surface.z) - 1:
        truncated_at = float(pi[0])
        log.info('Value reconstruction truncated at pi = {:.6g} (u <= {:g} beyond)'.format(
            truncated_at, floor))

    if pi_range is not None:
        lo, hi = pi_range
        keep = (pi >= lo) & (pi <= hi)
        pi, J = pi[keep], J[keep]

    curve = ValueCurve(pi=pi, J=J, anchor=(float(pi[0]), float(J[0])), truncated_at=truncated_at)
    if anchor is None:
        mid = len(pi) // 2
        anchor = (float(pi[mid]), 0.0)
    return curve.shifted(anchor)


def legendre_transform(x, f) -> typing.Tuple[np.ndarray, np.ndarray]:
    """(p, g) with p = f'(x) and f(x) + g(p) = p x at every node.

    ``f`` must be strictly convex or strictly concave on the samples.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.shape != f.shape or x.ndim != 1 or len(x) < 3:
        raise TransformError('Need at least three matching samples')
    if _monotone_slopes(x, f) == 0:
        raise TransformError('Slopes are not strictly monotone; p = f\'(x) has no unique inverse')
    p = np.gradient(f, x, edge_order=2)
    return p, p * x - f


def lt_linear_pde_residual(K: typing.Callable, dp: DerivedParams, point,
                           h: float = None) -> ResidualReport:
    """Residual of d_t K + (sigma^2 alpha_K^2 / 2) p^2 d_p^2 K at (p, t)."""
    p, t = point
    h = h or default_step(p)
    K_t, _, K_pp = _derivatives(K, p, t, h)
    residual = K_t + 0.5 * dp.sharpe ** 2 * p * p * K_pp
    return ResidualReport(x=p, t=t, residual=float(residual), h_x=h, h_t=h)


def lt06_residual(phi: typing.Callable, dp: DerivedParams, point, h: float = None,
                  K: typing.Callable = None) -> ResidualReport:
    """Residual of d_t phi + (sigma^2 alpha_K^2 / 2) d_p(p^2 d_p phi) at (p, t).

    With ``K`` given, ``aux`` holds phi + alpha_K p d_p^2 K, which vanishes for a matching pair.
    """
    p, t = point
    h = h or default_step(p)
    f0 = phi(p, t)
    up = (p + h / 2.0) ** 2 * (phi(p + h, t) - f0)
    down = (p - h / 2.0) ** 2 * (f0 - phi(p - h, t))
    phi_t = (phi(p, t + h) - phi(p, t - h)) / (2.0 * h)
    residual = phi_t + 0.5 * dp.sharpe ** 2 * (up - down) / (h * h)

    aux = None
    if K is not None:
        _, _, K_pp = _derivatives(K, p, t, h)
        aux = float(f0 + dp.alpha_K * p * K_pp)
    return ResidualReport(x=p, t=t, residual=float(residual), h_x=h, h_t=h, aux=aux)


def value_ratio_residual(J: typing.Callable, alpha: typing.Callable, dp: DerivedParams, point,
                         h: float = None) -> ResidualReport:
    """Residual of d_pi J / d_t J + 2 / ((mu - r) alpha pi) at (pi, t)."""
    pi, t = point
    h = h or default_step(pi)
    J_t, J_pi, _ = _derivatives(J, pi, t, h)
    if J_t == 0:
        raise SingularDerivativeError('d_t J vanishes at ({}, {})'.format(pi, t))
    # mu - r = s^2 / alpha_K
    excess = dp.sharpe ** 2 / dp.alpha_K
    residual = J_pi / J_t + 2.0 / (excess * alpha(pi, t) * pi)
    return ResidualReport(x=pi, t=t, residual=float(residual), h_x=h, h_t=h)


def legendre_defects(J: typing.Callable, K: typing.Callable, point,
                     h: float = None) -> LegendreDefects:
    """Defects of the four identities linking J(pi, t) and K(p, t) at (pi, t), p = d_pi J."""
    pi, t = point
    h = h or default_step(pi)
    J_t, p, J_pipi = _derivatives(J, pi, t, h)
    # Same relative resolution in p as in pi; d_t K is taken at fixed p.
    K_t, K_p, K_pp = _derivatives(K, p, t, h * abs(p) / max(abs(pi), 1.0))
    return LegendreDefects(
        identity=float(J(pi, t) + K(p, t) - p * pi),
        slope=float(K_p - pi),
        time_slope=float(J_t + K_t),
        curvature=float(J_pipi * K_pp - 1.0),
    )


def legendre_pair(curve: ValueCurve, gamma=None) -> TransformPair:
    """Sampled transform of a value curve; ``gamma`` (array or callable of pi) becomes phi."""
    p = np.gradient(curve.J, curve.pi, edge_order=2)
    phi = None
    if gamma is not None:
        phi = np.asarray(gamma(curve.pi) if callable(gamma) else gamma, dtype=float)
    return TransformPair(p=p, K=p * curve.pi - curve.J, phi=phi).validate()
