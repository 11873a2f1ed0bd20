import dataclasses
import functools
import logging
import pathlib
import sys

import arrow
import click
import humanize
import numpy as np
import pandas as pd

from kelly_stop import checks, config, figures
from kelly_stop.analytic import FreeKelly, TerminalStop
from kelly_stop.core import ParameterError, derive_params
from kelly_stop.export import LocalFSWriter, surface_document, surface_table
from kelly_stop.simulate import (
    AnalyticAdapter,
    ConstantStrategy,
    MultiAssetParams,
    SurfaceStrategy,
    apply_var_cap,
    compare_strategies,
    kelly_market_params,
    kelly_portfolio_stats,
    kelly_weights,
    scale_to_multi,
    simulate_paths,
)
from kelly_stop.solver import solve_stop_loss
from kelly_stop.utils import KellyStopError
from kelly_stop.value_fn import reconstruct_value
from kelly_stop.version import VERSION

log = logging.getLogger(__name__)

PROFILES = {
    'default': config.DefaultProfile,
    'test': config.TestProfile,
}
DEFAULTS = config.DefaultProfile.settings()
# Settings whose option is spelled differently from its parameter name.
SETTING_ALIASES = {'format': 'fmt'}
# Strategy names that scale the solved surface.
SURFACE_KAPPAS = {'solved': 1.0, 'half': 0.5, 'double': 2.0}

RUN_KEYS = ('mu', 'r', 'sigma', 'sharpe', 'period', 'stop_delta', 'nz', 'dtheta', 'theta_max',
            'paths', 'steps', 'seed', 'threads', 'var_cap')


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except KellyStopError as e:
            raise click.ClickException('{}: {}'.format(type(e).__name__, e))

    return wrapper


def apply_options(*options):
    def decorator(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return decorator


market_options = apply_options(
    click.option('--mu', type=float, help='Drift of the risky asset per year.'),
    click.option('--r', 'r', type=float, default=DEFAULTS['r'], show_default=True,
                 help='Risk-free rate per year.'),
    click.option('--sigma', type=float, default=DEFAULTS['sigma'], show_default=True,
                 help='Volatility per sqrt(year).'),
    click.option('--sharpe', type=float, default=DEFAULTS['sharpe'], show_default=True,
                 help='Annual Sharpe ratio, used when --mu is not given.'),
    click.option('--period', default=DEFAULTS['period'], show_default=True,
                 help='Reset period: 1m, 2w, 30d, 1y or a number of years.'),
    click.option('--stop-delta', type=float, default=DEFAULTS['stop_delta'], show_default=True,
                 help='Stop level distance below the period start value.'),
)

grid_options = apply_options(
    click.option('--nz', type=click.IntRange(min=1), default=DEFAULTS['nz'], show_default=True,
                 help='Interior z nodes.'),
    click.option('--dtheta', type=float, help='Scaled time step, chosen for stability if absent.'),
    click.option('--theta-max', type=float, help='Scaled horizon, one period if absent.'),
)

sim_options = apply_options(
    click.option('--paths', type=click.IntRange(min=1), default=DEFAULTS['paths'],
                 show_default=True),
    click.option('--steps', type=click.IntRange(min=1),
                 help='Time steps per period, 250 per month if absent.'),
    click.option('--seed', type=int, default=DEFAULTS['seed'], show_default=True),
    click.option('--threads', type=click.IntRange(min=1), default=DEFAULTS['threads'],
                 envvar='KELLYSTOP_THREADS', show_default=True, help='Simulation workers.'),
    click.option('--var-cap', type=float, help='Volatility ceiling sigma_max for "capped".'),
)

output_options = apply_options(
    click.option('--out', type=click.Path(file_okay=False), default=DEFAULTS['out'],
                 show_default=True, help='Output directory.'),
    click.option('--format', 'fmt', type=click.Choice(['csv', 'json']),
                 default=DEFAULTS['format'], show_default=True),
)


@click.group()
@click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False),
              help='Flat "key = value" recipe; explicit flags win over it.')
@click.option('--profile', type=click.Choice(sorted(PROFILES)), default='default',
              envvar='KELLYSTOP_PROFILE', show_default=True)
@click.option('-v', '--verbose', count=True, help='-v for progress, -vv for debug output.')
@click.version_option(VERSION)
@click.pass_context
@handle_errors
def kellystop(ctx, config_file, profile, verbose):
    if verbose:
        logging.basicConfig(
            level=logging.DEBUG if verbose > 1 else logging.INFO,
            stream=sys.stderr,
            format='%(asctime)s %(name)s %(levelname)s: %(message)s',
        )
    settings = PROFILES[profile].settings()
    if config_file:
        settings.update(config.load_config_file(config_file))
    settings = {SETTING_ALIASES.get(k, k): v for k, v in settings.items()}
    ctx.obj = settings
    ctx.default_map = {name: settings for name in ctx.command.commands}


def _run_config(options) -> config.RunConfig:
    settings = click.get_current_context().obj or DEFAULTS
    return config.RunConfig.from_options(
        stability_ratio=float(settings['stability_ratio']),
        steps_per_month=int(settings['steps_per_month']),
        **{k: options[k] for k in RUN_KEYS if k in options}
    )


def _writer(out) -> LocalFSWriter:
    path = pathlib.Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return LocalFSWriter(path)


def _report(writer: LocalFSWriter):
    for entry in writer.written:
        click.echo('Wrote {} ({})'.format(entry.name, humanize.naturalsize(entry.size, gnu=True)),
                   err=True)


def _solve(cfg: config.RunConfig, horizon: float = 0.0):
    if horizon > cfg.horizon:
        cfg = dataclasses.replace(cfg, theta_max=horizon)
    started = arrow.utcnow()
    surface = solve_stop_loss(cfg.problem())
    grid = surface.grid
    click.echo('Solved nz={} over {} steps to theta={:.6g} (stability ratio {:.3f}) in {}'.format(
        grid.nz, grid.ntheta, grid.theta_max, grid.stability_ratio,
        humanize.precisedelta(arrow.utcnow() - started, minimum_unit='milliseconds')), err=True)
    return surface


def build_strategy(spec: str, cfg: config.RunConfig, surface):
    """Strategy for a name such as 'solved', 'half', 'kappa:0.75', 'kelly' or 'none'.

    ``surface`` is called to get the solved surface only when the strategy needs it.
    """
    name, _, arg = spec.strip().lower().partition(':')
    dp, T = cfg.dp, cfg.period
    if name in SURFACE_KAPPAS or name == 'kappa':
        if name == 'kappa':
            try:
                kappa = float(arg)
            except ValueError:
                raise ParameterError('Invalid Kelly multiple in {!r}'.format(spec))
        else:
            kappa = SURFACE_KAPPAS[name]
        return SurfaceStrategy(surface(), dp, cfg.pi_c, T, kappa=kappa, label=spec.strip())
    if name == 'capped':
        if cfg.var_cap is None:
            raise ParameterError('The capped strategy needs --var-cap')
        return SurfaceStrategy(surface(), dp, cfg.pi_c, T, var_cap=cfg.var_cap, label='capped')
    if name == 'kelly':
        return AnalyticAdapter(FreeKelly(), dp, T, label='kelly')
    if name == 'terminal':
        return AnalyticAdapter(TerminalStop(cfg.pi_c), dp, T, label='terminal')
    if name == 'none':
        return ConstantStrategy(0.0, label='none')
    raise ParameterError('Unknown strategy {!r}'.format(spec))


def _lazy_surface(cfg: config.RunConfig):
    return functools.lru_cache(maxsize=None)(lambda: _solve(cfg))


@kellystop.command()
@market_options
@grid_options
@click.option('--out', type=click.Path(file_okay=False), default=DEFAULTS['out'],
              show_default=True, help='Output directory.')
@handle_errors
def solve(out, **options):
    """Solve for the stop-loss strategy and write surface.csv and surface.json."""
    cfg = _run_config(options)
    surface = _solve(cfg)
    writer = _writer(out)
    writer.write_table('surface.csv', surface_table(surface))
    writer.write_document('surface.json', surface_document(surface, cfg.as_dict()))
    _report(writer)


@kellystop.command()
@click.argument('which')
@market_options
@grid_options
@output_options
@handle_errors
def figure(which, out, fmt, **options):
    """Write the data table behind figure WHICH (1a, 1b, 2a or 2b)."""
    cfg = _run_config(options)
    which = figures.FigureId.as_figure(which)
    surface = _solve(cfg, figures.required_theta(which, cfg.dp, cfg.period))
    table = figures.figure_table(which, surface, cfg.dp, cfg.period)
    writer = _writer(out)
    writer.write('figure-{}'.format(which.value), fmt, table=table)
    _report(writer)


@kellystop.command('simulate')
@click.option('--strategy', default='solved', show_default=True)
@click.option('--path-summary', is_flag=True, help='Also write per-path results to paths.csv.')
@market_options
@grid_options
@sim_options
@output_options
@handle_errors
def simulate_command(strategy, path_summary, out, fmt, **options):
    """Simulate one reset period under a single strategy."""
    cfg = _run_config(options)
    sim_cfg = cfg.sim_config()
    chosen = build_strategy(strategy, cfg, _lazy_surface(cfg))
    started = arrow.utcnow()
    paths = simulate_paths(sim_cfg, cfg.dp, chosen)
    result = paths.summarise(chosen.label, sim_cfg)

    writer = _writer(out)
    document = dict(result.as_dict(), config=cfg.as_dict(), n_steps=sim_cfg.n_steps)
    writer.write('simulation', fmt, table=pd.DataFrame([result.as_dict()]), document=document)
    if path_summary:
        writer.write_table('paths.csv', paths.as_table())
    click.echo('{}: mean log growth {:.6f} +/- {:.6f}, stop hit rate {:.4f}'.format(
        result.label, result.mean_log_growth, result.std_error, result.stop_hit_rate))
    click.echo('Simulated {} paths in {}'.format(
        humanize.intcomma(result.n_paths),
        humanize.precisedelta(arrow.utcnow() - started, minimum_unit='milliseconds')), err=True)
    _report(writer)


@kellystop.command()
@click.option('--strategies', default='solved,half,double', show_default=True,
              help='Comma separated: solved, half, double, kappa:<x>, capped, terminal, kelly, '
                   'none.')
@market_options
@grid_options
@sim_options
@output_options
@handle_errors
def compare(strategies, out, fmt, **options):
    """Rank strategies by mean log growth under shared random numbers."""
    cfg = _run_config(options)
    surface = _lazy_surface(cfg)
    chosen = [build_strategy(spec, cfg, surface) for spec in strategies.split(',') if spec.strip()]
    comparison = compare_strategies(cfg.sim_config(), cfg.dp, chosen)
    table = comparison.as_table()

    writer = _writer(out)
    writer.write('comparison', fmt, table=table)
    click.echo(table.to_string(index=False))
    _report(writer)


@kellystop.command()
@click.option('--only', multiple=True, type=click.Choice(checks.names()),
              help='Run just the named check; repeatable.')
@handle_errors
def check(only):
    """Run the residual and oracle checks."""
    results = checks.run_all(list(only))
    for result in results:
        click.echo('{}  {}  {}'.format('PASS' if result.passed else 'FAIL', result.name,
                                       result.detail))
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise click.ClickException('CheckFailed: {} of {} checks failed ({})'.format(
            len(failed), len(results), ', '.join(failed)))


@kellystop.command('reconstruct-value')
@click.option('--theta', type=float, help='Scaled time of the slice, the full period if absent.')
@click.option('--pi-max', type=float, default=10.0, show_default=True,
              help='Largest portfolio value written, in units of the stop level.')
@market_options
@grid_options
@output_options
@handle_errors
def reconstruct_value_command(theta, pi_max, out, fmt, **options):
    """Rebuild the value function implied by the solved strategy at one scaled time."""
    cfg = _run_config(options)
    theta = cfg.horizon if theta is None else theta
    surface = _solve(cfg, theta)
    curve = reconstruct_value(surface, theta, pi_c=cfg.pi_c,
                              pi_range=(cfg.pi_c, pi_max * cfg.pi_c))
    if curve.truncated_at is not None:
        click.echo('Value function truncated at pi = {:.6g}'.format(curve.truncated_at), err=True)

    writer = _writer(out)
    document = {
        'theta': theta,
        'anchor': list(curve.anchor),
        'truncated_at': curve.truncated_at,
        'pi': curve.pi,
        'J': curve.J,
    }
    writer.write('value', fmt, table=curve.as_table(), document=document)
    _report(writer)


def _floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(',')])
    except ValueError:
        raise ParameterError('{} must be comma separated numbers, got {!r}'.format(what, text))


@kellystop.command('multi-asset')
@click.option('--excess', required=True, help='Comma separated excess drifts mu_k - r.')
@click.option('--cov', required=True, help='Covariance matrix, comma separated, row by row.')
@click.option('--u', 'u', type=float, default=1.0, show_default=True,
              help='Scaled strategy value to allocate.')
@click.option('--var-cap', type=float, help='Volatility ceiling applied to u.')
@output_options
@handle_errors
def multi_asset(excess, cov, u, var_cap, out, fmt):
    """Kelly weights, Kelly portfolio statistics and the allocation u * alpha_K."""
    excess = _floats(excess, 'excess')
    cov = _floats(cov, 'cov')
    n = len(excess)
    if len(cov) != n * n:
        raise ParameterError('Expected {} covariance entries for {} assets, got {}'.format(
            n * n, n, len(cov)))
    mp = MultiAssetParams(excess=excess, C=cov.reshape(n, n))
    weights = kelly_weights(mp)
    stats = kelly_portfolio_stats(mp)
    kelly_dp = derive_params(kelly_market_params(mp))
    if var_cap is not None:
        u = apply_var_cap(u, var_cap, kelly_dp.sharpe)
    allocation = scale_to_multi(u, weights)

    writer = _writer(out)
    table = pd.DataFrame({
        'asset': np.arange(n),
        'excess': excess,
        'kelly_weight': weights,
        'allocation': allocation,
    })
    document = {
        'mu_K': stats.mu_K,
        'sigma_K': stats.sigma_K,
        'kelly_allocation': kelly_dp.alpha_K,
        'u': u,
        'weights': weights,
        'allocation': allocation,
    }
    writer.write('multi-asset', fmt, table=table, document=document)
    click.echo('mu_K = {:.6g}, sigma_K = {:.6g}, Kelly-into-Kelly allocation = {:.6g}'.format(
        stats.mu_K, stats.sigma_K, kelly_dp.alpha_K))
    _report(writer)
