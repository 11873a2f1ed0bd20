"""Plot-ready tables of the solved stop-loss strategy.

1a  u over the (z, theta) box [0, 1] x [0, 1] with region labels
1b  u against weeks to the next reset for portfolios 1%, 5%, 10% and 20% above the stop
2a  u against z at theta = 0.01, 0.1, 0.5 and 2 with the long-horizon limit 1 - z
2b  u against theta at z = 0.85 with the limit 0.15
"""
import enum
import logging

import numpy as np
import pandas as pd

from kelly_stop.core import DerivedParams, ParameterError, StrategySurface
from kelly_stop.solver import SliceMode, classify_values, extract_slice
from kelly_stop.utils import KellyStopError

log = logging.getLogger(__name__)

DELTAS = (0.01, 0.05, 0.10, 0.20)
THETAS = (0.01, 0.1, 0.5, 2.0)
FIXED_Z = 0.85
DAYS_PER_WEEK = 7.0
DAYS_PER_YEAR = 365.0


class UnknownFigureError(KellyStopError, ValueError):
    pass


class FigureId(enum.Enum):
    box = '1a'
    reset = '1b'
    z_slices = '2a'
    theta_slice = '2b'

    @classmethod
    def as_figure(cls, value) -> 'FigureId':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownFigureError('Unknown figure {!r}, expected one of {}'.format(
                value, ', '.join(f.value for f in cls)))


def required_theta(which, dp: DerivedParams = None, period: float = None) -> float:
    """Scaled horizon a surface must reach to draw ``which``."""
    which = FigureId.as_figure(which)
    if which is FigureId.reset:
        if dp is None or period is None:
            raise ParameterError('Figure 1b needs the market parameters and the period')
        return period / dp.tau
    if which is FigureId.box:
        return 1.0
    if which is FigureId.z_slices:
        return max(THETAS)
    return 3.0


def _box(surface: StrategySurface, n_theta: int = 101) -> pd.DataFrame:
    thetas = np.linspace(0.0, 1.0, n_theta)
    zz, tt = np.meshgrid(surface.z, thetas)
    u = np.asarray(surface.interpolate(zz, tt))
    return pd.DataFrame({
        'z': zz.ravel(),
        'theta': tt.ravel(),
        'u': u.ravel(),
        'region': classify_values(u).ravel(),
    })


def _reset(surface: StrategySurface, dp: DerivedParams, period: float) -> pd.DataFrame:
    theta_max = period / dp.tau
    thetas = surface.thetas[surface.thetas <= theta_max * (1 + 1e-12)]
    table = {'weeks': thetas * dp.tau * DAYS_PER_YEAR / DAYS_PER_WEEK}
    for delta in DELTAS:
        column = 'u_delta_{:g}pct'.format(delta * 100)
        table[column] = extract_slice(surface, SliceMode.fixed_delta, delta, coords=thetas).u
    return pd.DataFrame(table)


def _z_slices(surface: StrategySurface) -> pd.DataFrame:
    table = {'z': surface.z}
    for theta in THETAS:
        table['u_theta_{:g}'.format(theta)] = extract_slice(
            surface, SliceMode.fixed_theta, theta).u
    table['reference'] = 1.0 - surface.z
    return pd.DataFrame(table)


def _theta_slice(surface: StrategySurface) -> pd.DataFrame:
    cut = extract_slice(surface, SliceMode.fixed_z, FIXED_Z)
    return pd.DataFrame({
        'theta': cut.coord,
        'u': cut.u,
        'reference': np.full_like(cut.u, 1.0 - FIXED_Z),
    })


def figure_table(which, surface: StrategySurface, dp: DerivedParams = None,
                 period: float = None) -> pd.DataFrame:
    which = FigureId.as_figure(which)
    needed = required_theta(which, dp, period)
    if surface.theta_max < needed * (1 - 1e-9):
        raise ParameterError('Figure {} needs the surface up to theta = {:g}, it stops at {:g}'
                             .format(which.value, needed, surface.theta_max))
    log.debug('Tabulating figure {}'.format(which.value))
    if which is FigureId.box:
        return _box(surface)
    if which is FigureId.reset:
        return _reset(surface, dp, period)
    if which is FigureId.z_slices:
        return _z_slices(surface)
    return _theta_slice(surface)
