import logging
import math
import re
import typing

import numpy as np
import wrapt

log = logging.getLogger(__name__)

ArrayLike = typing.Union[float, np.ndarray]

# Years per unit for period strings such as '1m' or '2w'.
PERIOD_UNITS = {
    'd': 1.0 / 365.0,
    'w': 7.0 / 365.0,
    'm': 1.0 / 12.0,
    'y': 1.0,
}

_period_re = re.compile(
    r'^\s*(?P<count>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(?P<unit>[dwmy]?)\s*$'
)


class KellyStopError(Exception):
    pass


class NumericalInstabilityError(KellyStopError):
    pass


class PeriodFormatError(KellyStopError, ValueError):
    pass


@wrapt.decorator
def numerics_guard(wrapped, instance, args, kwargs):
    """Run a numeric kernel with floating point overflow/invalid operations raising.

    Any ``FloatingPointError`` is re-raised as :class:`NumericalInstabilityError` naming the
    kernel, so callers only have to deal with package errors.
    """
    with np.errstate(over='raise', invalid='raise'):
        try:
            return wrapped(*args, **kwargs)
        except FloatingPointError as e:
            raise NumericalInstabilityError(
                '{} produced a non-finite value: {}'.format(wrapped.__name__, e)
            ) from e


def as_result(value) -> ArrayLike:
    """Hand back a plain float for scalar results and an ndarray otherwise."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return arr


def period_to_years(text: typing.Union[str, float]) -> float:
    if isinstance(text, (int, float)):
        years = float(text)
    else:
        match = _period_re.match(text)
        if match is None:
            raise PeriodFormatError(
                'Invalid period {!r}, expected a number with unit d, w, m or y'.format(text)
            )
        years = float(match.group('count')) * PERIOD_UNITS[match.group('unit') or 'y']
    if years <= 0:
        raise PeriodFormatError('Period must be positive, got {!r}'.format(text))
    return years


def format_number(value) -> str:
    """17 significant digits, enough to round-trip any double."""
    return '{:.17g}'.format(value)


def central_diff(fn: typing.Callable[[float], float], x: float, h: float) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def second_diff(fn: typing.Callable[[float], float], x: float, h: float) -> float:
    return (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / (h * h)


def default_step(x: float, scale: float = 1e-4) -> float:
    return scale * max(abs(x), 1.0)


def observed_order(errors: typing.Sequence[float], steps: typing.Sequence[float]):
    """Convergence orders between consecutive (step, error) pairs."""
    orders = []
    for (e1, h1), (e2, h2) in zip(zip(errors, steps), zip(errors[1:], steps[1:])):
        if e1 == 0 or e2 == 0:
            orders.append(math.inf)
            continue
        orders.append(math.log(abs(e1) / abs(e2)) / math.log(h1 / h2))
    return orders
