"""Monte Carlo simulation of discounted wealth under a controlled risky fraction.

Paths are simulated in blocks. Block ``k`` draws its normals from a PCG64 stream seeded by
``SeedSequence(seed, spawn_key=(k,))``, so results depend only on the seed and not on the number
of worker threads, and every strategy simulated with the same config sees the same draws.
"""
import concurrent.futures
import dataclasses
import logging
import math
import typing

import numpy as np
import pandas as pd
import scipy.linalg
from blazeutils.helpers import ensure_list

from kelly_stop.analytic import AnalyticStrategy, Drawdown, StrategyState
from kelly_stop.core import DerivedParams, MarketParams, ParameterError, StrategySurface
from kelly_stop.utils import ArrayLike, KellyStopError, as_result, period_to_years

log = logging.getLogger(__name__)

RNG_NAME = 'PCG64'
DEFAULT_BLOCK_SIZE = 10_000
STEPS_PER_MONTH = 250
# Negative fractions smaller than this are rounding noise, not a short position.
NEGATIVE_SLACK = 1e-12


class SimulationError(KellyStopError):
    pass


class NotPositiveDefiniteError(KellyStopError, ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """One reset period of length ``T`` years; ``pi_c = 0`` simulates without a stop."""
    n_paths: int
    n_steps: int
    seed: int
    T: float
    pi_c: float = 0.0
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ParameterError('n_paths must be at least 1, got {}'.format(self.n_paths))
        if self.n_steps < 1:
            raise ParameterError('n_steps must be at least 1, got {}'.format(self.n_steps))
        if not self.T > 0:
            raise ParameterError('Period length must be positive, got {}'.format(self.T))
        if not 0 <= self.pi_c < 1:
            raise ParameterError('Stop level must lie in [0, 1), got {}'.format(self.pi_c))
        if self.block_size < 1 or self.workers < 1:
            raise ParameterError('block_size and workers must be at least 1')

    @classmethod
    def for_period(cls, period, n_paths: int, seed: int, stop_delta: float = None,
                   steps_per_month: int = STEPS_PER_MONTH, **kwargs) -> 'SimConfig':
        T = period_to_years(period)
        n_steps = max(1, math.ceil(steps_per_month * 12 * T))
        pi_c = 0.0 if stop_delta is None else 1.0 - stop_delta
        return cls(n_paths=n_paths, n_steps=n_steps, seed=seed, T=T, pi_c=pi_c, **kwargs)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def has_stop(self) -> bool:
        return self.pi_c > 0

    def blocks(self) -> typing.List[typing.Tuple[int, int]]:
        """(block index, path count) pairs covering ``n_paths``."""
        full, rest = divmod(self.n_paths, self.block_size)
        sizes = [self.block_size] * full + ([rest] if rest else [])
        return list(enumerate(sizes))


class SimResult(typing.NamedTuple):
    label: str
    mean_log_growth: float
    std_error: float
    stop_hit_rate: float
    n_paths: int
    seed: int
    rng: str = RNG_NAME
    max_violation: float = 0.0
    max_drawdown: typing.Optional[float] = None

    def as_dict(self):
        return self._asdict()


class PathSet(typing.NamedTuple):
    log_growth: np.ndarray
    stopped: np.ndarray
    drawdown: np.ndarray
    max_violation: float = 0.0

    def summarise(self, label: str, cfg: SimConfig) -> SimResult:
        n = len(self.log_growth)
        std_error = float(np.std(self.log_growth, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return SimResult(
            label=label,
            mean_log_growth=float(np.mean(self.log_growth)),
            std_error=std_error,
            stop_hit_rate=float(np.mean(self.stopped)),
            n_paths=n,
            seed=cfg.seed,
            max_violation=self.max_violation,
            max_drawdown=float(np.max(self.drawdown)),
        )

    def as_table(self) -> pd.DataFrame:
        return pd.DataFrame({
            'path': np.arange(len(self.log_growth)),
            'log_growth': self.log_growth,
            'stopped': self.stopped.astype(int),
            'max_drawdown': self.drawdown,
        })


class Strategy:
    """Risky fraction as a vectorised function of (pi, t) and the high-water mark m."""
    label = 'strategy'
    # Floor lam * m below which the simulator reports a constraint violation.
    floor_fraction = 0.0

    def fraction(self, pi: np.ndarray, t: float, m: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def __str__(self):
        return self.label


class ConstantStrategy(Strategy):
    def __init__(self, alpha: float, label: str = None):
        self.alpha = float(alpha)
        self.label = label or 'constant({:g})'.format(self.alpha)

    def fraction(self, pi, t, m):
        return np.full_like(pi, self.alpha)


class AnalyticAdapter(Strategy):
    def __init__(self, analytic: AnalyticStrategy, dp: DerivedParams, T: float,
                 label: str = None):
        self.analytic = analytic
        self.dp = dp
        self.T = T
        self.label = label or str(analytic)
        if isinstance(analytic, Drawdown):
            self.floor_fraction = analytic.lam

    def fraction(self, pi, t, m):
        if self.floor_fraction:
            # A discrete step can undershoot the floor; hold cash until back above it.
            pi = np.maximum(pi, self.floor_fraction * m)
        return np.asarray(self.analytic.fraction(StrategyState(pi, t, m), self.dp, self.T))


class SurfaceStrategy(Strategy):
    """alpha = alpha_K * kappa * u(pi_c / pi, (T - t) / tau), optionally under a VaR cap."""

    def __init__(self, surface: StrategySurface, dp: DerivedParams, pi_c: float, T: float,
                 kappa: float = 1.0, var_cap: float = None, label: str = None):
        if not pi_c > 0:
            raise ParameterError('A surface strategy needs a positive stop level')
        if surface.theta_max < T / dp.tau * (1 - 1e-9):
            raise ParameterError('Surface reaches theta = {:.6g} but the period needs {:.6g}'
                                 .format(surface.theta_max, T / dp.tau))
        self.surface = surface
        self.dp = dp
        self.pi_c = pi_c
        self.T = T
        self.kappa = kappa
        self.var_cap = var_cap
        self.label = label or ('solved' if kappa == 1 else 'solved x{:g}'.format(kappa))
        if var_cap is not None and label is None:
            self.label += ' capped({:g})'.format(var_cap)

    def fraction(self, pi, t, m):
        u = self.kappa * np.asarray(self.surface.interpolate(self.pi_c / pi,
                                                             (self.T - t) / self.dp.tau))
        if self.var_cap is not None:
            u = apply_var_cap(u, self.var_cap, self.dp.sharpe)
        return self.dp.alpha_K * u


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _run_block(strategy: Strategy, cfg: SimConfig, dp: DerivedParams, block: int, n: int):
    rng = _block_rng(cfg.seed, block)
    dt = cfg.dt
    sqrt_dt = math.sqrt(dt)
    # sigma = s / alpha_K and mu - r = s^2 / alpha_K
    sigma = dp.sharpe / dp.alpha_K
    excess = dp.sharpe ** 2 / dp.alpha_K

    pi = np.ones(n)
    m = np.ones(n)
    drawdown = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    violation = 0.0

    for k in range(cfg.n_steps):
        # Draw for every path so that all strategies share the same normals.
        xi = rng.standard_normal(n)
        if cfg.has_stop and not alive.any():
            continue
        idx = np.nonzero(alive)[0] if cfg.has_stop else slice(None)
        t = k * dt
        alpha = strategy.fraction(pi[idx], t, m[idx])
        bad = ~np.isfinite(alpha)
        if dp.alpha_K > 0:
            bad |= alpha < -NEGATIVE_SLACK
        if np.any(bad):
            first = int(np.argmax(bad))
            raise SimulationError('{} returned alpha = {} at t = {:.6g}, pi = {:.6g} '
                                  '(block {}, step {})'.format(strategy, alpha[first], t,
                                                               pi[idx][first], block, k))
        pi[idx] *= np.exp((alpha * excess - 0.5 * (alpha * sigma) ** 2) * dt
                          + alpha * sigma * sqrt_dt * xi[idx])

        if cfg.has_stop:
            hit = alive & (pi <= cfg.pi_c)
            pi[hit] = cfg.pi_c
            alive &= ~hit
        np.maximum(m, pi, out=m)
        np.maximum(drawdown, 1.0 - pi / m, out=drawdown)
        if strategy.floor_fraction:
            violation = max(violation, float(np.max(strategy.floor_fraction - pi / m)))

    return PathSet(log_growth=np.log(pi), stopped=~alive, drawdown=drawdown,
                   max_violation=max(violation, 0.0))


def simulate_paths(cfg: SimConfig, dp: DerivedParams, strategy: Strategy) -> PathSet:
    blocks = cfg.blocks()
    log.debug('Simulating {} over {} blocks with {} worker(s)'.format(
        strategy, len(blocks), cfg.workers))
    if cfg.workers == 1 or len(blocks) == 1:
        parts = [_run_block(strategy, cfg, dp, block, n) for block, n in blocks]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda bn: _run_block(strategy, cfg, dp, *bn), blocks))
    return PathSet(
        log_growth=np.concatenate([p.log_growth for p in parts]),
        stopped=np.concatenate([p.stopped for p in parts]),
        drawdown=np.concatenate([p.drawdown for p in parts]),
        max_violation=max(p.max_violation for p in parts),
    )


def simulate(cfg: SimConfig, dp: DerivedParams, strategy: Strategy) -> SimResult:
    result = simulate_paths(cfg, dp, strategy).summarise(strategy.label, cfg)
    log.info('{}: mean log growth {:.6g} +/- {:.2g}, stop hit rate {:.4f}'.format(
        result.label, result.mean_log_growth, result.std_error, result.stop_hit_rate))
    return result


class Comparison(typing.NamedTuple):
    """Results ranked by mean log growth, best first, with the per-path growth behind them."""
    results: typing.List[SimResult]
    growth: typing.Dict[str, np.ndarray]

    @property
    def best(self) -> SimResult:
        return self.results[0]

    def pairwise(self, a: str, b: str) -> typing.Tuple[float, float]:
        """Mean of the per-path growth differences a - b and its standard error."""
        diff = self.growth[a] - self.growth[b]
        return float(np.mean(diff)), float(np.std(diff, ddof=1) / math.sqrt(len(diff)))

    def as_table(self) -> pd.DataFrame:
        rows = []
        for rank, result in enumerate(self.results, start=1):
            gap, se = self.pairwise(self.best.label, result.label) if rank > 1 else (0.0, 0.0)
            rows.append({
                'rank': rank,
                'label': result.label,
                'mean_log_growth': result.mean_log_growth,
                'std_error': result.std_error,
                'stop_hit_rate': result.stop_hit_rate,
                'gap_to_best': gap,
                'gap_std_error': se,
            })
        return pd.DataFrame(rows)


def _unique_labels(strategies):
    seen = {}
    labels = []
    for s in strategies:
        count = seen.get(s.label, 0) + 1
        seen[s.label] = count
        labels.append(s.label if count == 1 else '{} ({})'.format(s.label, count))
    return labels


def compare_strategies(cfg: SimConfig, dp: DerivedParams, strategies) -> Comparison:
    strategies = ensure_list(strategies)
    if len(strategies) < 2:
        raise ParameterError('A comparison needs at least two strategies')
    results = []
    growth = {}
    for label, strategy in zip(_unique_labels(strategies), strategies):
        paths = simulate_paths(cfg, dp, strategy)
        growth[label] = paths.log_growth
        results.append(paths.summarise(label, cfg))
    results.sort(key=lambda r: r.mean_log_growth, reverse=True)
    log.info('Comparison winner: {}'.format(results[0].label))
    return Comparison(results=results, growth=growth)


def simulate_drawdown(cfg: SimConfig, dp: DerivedParams, lam: float) -> SimResult:
    """Free Kelly on the excess over lam * (running maximum); no stop-loss absorption."""
    strategy = AnalyticAdapter(Drawdown(lam), dp, cfg.T, label='drawdown({:g})'.format(lam))
    return simulate(dataclasses.replace(cfg, pi_c=0.0), dp, strategy)


@dataclasses.dataclass(frozen=True, eq=False)
class MultiAssetParams:
    """Excess drifts ``mu_k - r`` and covariance ``C`` (both per year)."""
    excess: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        excess = np.atleast_1d(np.asarray(self.excess, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if excess.ndim != 1 or C.shape != (len(excess), len(excess)):
            raise ParameterError('Covariance shape {} does not match {} assets'.format(
                C.shape, len(excess)))
        if not np.allclose(C, C.T, rtol=1e-12, atol=0.0):
            raise NotPositiveDefiniteError('Covariance matrix is not symmetric')
        try:
            factor = scipy.linalg.cho_factor(C)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefiniteError('Covariance matrix is not positive definite') from e
        object.__setattr__(self, 'excess', excess)
        object.__setattr__(self, 'C', C)
        object.__setattr__(self, '_factor', factor)

    @classmethod
    def from_vols(cls, excess, sigmas, rho) -> 'MultiAssetParams':
        sigmas = np.asarray(sigmas, dtype=float)
        return cls(excess=excess, C=np.outer(sigmas, sigmas) * np.asarray(rho, dtype=float))

    @property
    def n_assets(self) -> int:
        return len(self.excess)


class KellyPortfolio(typing.NamedTuple):
    mu_K: float
    sigma_K: float


def kelly_weights(mp: MultiAssetParams) -> np.ndarray:
    weights = scipy.linalg.cho_solve(mp._factor, mp.excess)
    residual = np.linalg.norm(mp.C @ weights - mp.excess)
    if residual > 1e-10 * np.linalg.norm(mp.excess):
        raise NotPositiveDefiniteError(
            'Covariance matrix is too ill-conditioned (residual {:.3g})'.format(residual))
    return weights


def kelly_portfolio_stats(mp: MultiAssetParams) -> KellyPortfolio:
    weights = kelly_weights(mp)
    mu_K = float(mp.excess @ weights)
    variance = float(weights @ mp.C @ weights)
    if not math.isclose(mu_K, variance, rel_tol=1e-9, abs_tol=1e-15):
        raise NotPositiveDefiniteError('Kelly portfolio drift {} differs from its variance {}'
                                       .format(mu_K, variance))
    return KellyPortfolio(mu_K=mu_K, sigma_K=math.sqrt(mu_K))


def kelly_market_params(mp: MultiAssetParams) -> MarketParams:
    """The Kelly portfolio as a single risky asset, so the scalar pipeline applies unchanged."""
    stats = kelly_portfolio_stats(mp)
    return MarketParams(mu=stats.mu_K, r=0.0, sigma=stats.sigma_K).validate()


def scale_to_multi(u: float, weights) -> np.ndarray:
    """Allocation u * alpha_K across the assets for a scaled strategy value u."""
    if not math.isfinite(u):
        raise ParameterError('Scaled strategy must be finite, got {}'.format(u))
    return u * np.asarray(weights, dtype=float)


def apply_var_cap(u: ArrayLike, sigma_max: float, s: float) -> ArrayLike:
    """u capped at sigma_max / s, the largest scaled position a volatility limit allows."""
    if not sigma_max > 0 or not s > 0:
        raise ParameterError('The VaR cap needs sigma_max > 0 and s > 0')
    return as_result(np.minimum(u, sigma_max / s))
