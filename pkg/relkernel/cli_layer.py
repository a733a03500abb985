"""
CLI Layer - run configuration files and the command-line surface

A run file is INI-style; every key must be known and appear once:

    [run]     command, seed, output
    [model]   d, alpha, m
    [domain]  spec
    [mc]      n_samples, grid_steps, n_streams, time_horizon_cap
    [sweep]   theorem, m_grid, t_grid, n_pairs, pairs, mass_bound, max_rel_se,
              cap, c2_inner, fit_c2, self_test
    [exit]    m_grid, r_grid, a_factor, target, mass_bound, radius_bound, gamma_floor
    [query]   quantity, t, x, y, r
    [plot]    axis

Lists are comma separated, point coordinates ';' separated, and sweep pairs
written as "x / y" items joined by '|'.
"""
import argparse
import configparser
import os
from dataclasses import dataclass, field
from typing import Optional

from relkernel import __version__
from relkernel.config import Config, MCConfig, ModelParams
from relkernel.domain_layer import Domain, parse_domain
from relkernel.errors import ConfigError
from relkernel.logging_config import set_level
from relkernel.plot_layer import AXES
from relkernel.verification_layer import ExitCheckConfig, SweepConfig

COMMANDS = ('levy', 'kernel', 'simulate', 'estimate', 'sweep', 'exit-check', 'report')
QUANTITIES = ('kernel', 'survival', 'green', 'lambda1')

SCHEMA = {
    'run': ('command', 'seed', 'output'),
    'model': ('d', 'alpha', 'm'),
    'domain': ('spec',),
    'mc': ('n_samples', 'grid_steps', 'n_streams', 'time_horizon_cap'),
    'sweep': ('theorem', 'm_grid', 't_grid', 'n_pairs', 'pairs', 'mass_bound', 'max_rel_se', 'cap',
              'c2_inner', 'fit_c2', 'self_test'),
    'exit': ('m_grid', 'r_grid', 'a_factor', 'target', 'mass_bound', 'radius_bound', 'gamma_floor'),
    'query': ('quantity', 't', 'x', 'y', 'r'),
    'plot': ('axis',),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int
    params: ModelParams
    output_dir: str
    mc: MCConfig
    domain: Optional[Domain] = None
    sweep: Optional[SweepConfig] = None
    exit_check: Optional[ExitCheckConfig] = None
    query: dict = field(default_factory=dict)
    plot_axis: str = 't'

    def path(self, name):
        return os.path.join(self.output_dir, name)


def _number(section, key, text, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"expected {'an integer' if kind is int else 'a number'}, got {text!r}")


def _flag(section, key, text):
    value = text.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"{section}.{key}", f"expected true or false, got {text!r}")


def _numbers(section, key, text):
    items = [s.strip() for s in text.split(',') if s.strip()]
    if not items:
        raise ConfigError(f"{section}.{key}", "expected a non-empty comma-separated list")
    return tuple(_number(section, key, s) for s in items)


def _point(section, key, text, d):
    coords = tuple(_number(section, key, s.strip()) for s in text.split(';') if s.strip())
    if len(coords) != d:
        raise ConfigError(f"{section}.{key}", f"expected {d} ';'-separated coordinates, got {text!r}")
    return coords


def _pairs(text, d):
    pairs = []
    for item in (s.strip() for s in text.split('|')):
        if not item:
            continue
        if item.count('/') != 1:
            raise ConfigError('sweep.pairs', f"expected 'x / y', got {item!r}")
        x, y = item.split('/')
        pairs.append((_point('sweep', 'pairs', x, d), _point('sweep', 'pairs', y, d)))
    return tuple(pairs)


def _read(source, overrides):
    parser = configparser.ConfigParser(strict=True, interpolation=None)
    try:
        if isinstance(source, dict):
            parser.read_dict(source)
        else:
            if not os.path.isfile(source):
                raise ConfigError('config', f"file not found: {source}")
            with open(source) as f:
                parser.read_file(f)
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigError('config', f"duplicate entry ({e.message.splitlines()[0]})")
    except configparser.Error as e:
        raise ConfigError('config', f"cannot parse: {e.message.splitlines()[0]}")
    for item in overrides or ():
        if '=' not in item or '.' not in item.split('=', 1)[0]:
            raise ConfigError('set', f"expected section.key=value, got {item!r}")
        name, value = item.split('=', 1)
        section, key = name.strip().split('.', 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(section, f"unknown section; expected one of {sorted(SCHEMA)}")
        unknown = sorted(set(parser[section]) - set(SCHEMA[section]))
        if unknown:
            raise ConfigError(section, f"unknown keys {unknown}")
    return parser


def _section(parser, name):
    return dict(parser[name]) if parser.has_section(name) else {}


def _mc_config(parser, seed):
    raw = _section(parser, 'mc')
    kwargs = {'seed': seed}
    for key in ('n_samples', 'grid_steps', 'n_streams'):
        if key in raw:
            kwargs[key] = _number('mc', key, raw[key], int)
    if 'time_horizon_cap' in raw:
        kwargs['time_horizon_cap'] = _number('mc', 'time_horizon_cap', raw['time_horizon_cap'])
    if 'n_samples' in kwargs and 'n_streams' not in kwargs:
        kwargs['n_streams'] = min(Config.N_STREAMS, kwargs['n_samples'])
    return MCConfig(**kwargs)


def _sweep_config(parser, params, domain, mc):
    raw = _section(parser, 'sweep')
    if 'theorem' not in raw:
        raise ConfigError('sweep.theorem', "is required for the sweep command")
    if domain is None:
        raise ConfigError('domain.spec', "is required for the sweep command")
    kwargs = {'theorem_tag': raw['theorem'].strip(), 'domain': domain, 'd': params.d, 'alpha': params.alpha,
              'mc': mc, 'm_grid': _numbers('sweep', 'm_grid', raw['m_grid']) if 'm_grid' in raw else (params.m,)}
    if 't_grid' in raw:
        kwargs['t_grid'] = _numbers('sweep', 't_grid', raw['t_grid'])
    if 'pairs' in raw:
        kwargs['pairs'] = _pairs(raw['pairs'], params.d)
    if 'n_pairs' in raw:
        kwargs['n_pairs'] = _number('sweep', 'n_pairs', raw['n_pairs'], int)
    for key in ('mass_bound', 'max_rel_se', 'cap', 'c2_inner'):
        if key in raw:
            kwargs[key] = _number('sweep', key, raw[key])
    for key in ('fit_c2', 'self_test'):
        if key in raw:
            kwargs[key] = _flag('sweep', key, raw[key])
    return SweepConfig(**kwargs)


def _exit_config(parser, params, mc):
    raw = _section(parser, 'exit')
    kwargs = {'d': params.d, 'alpha': params.alpha, 'mc': mc}
    for key in ('m_grid', 'r_grid'):
        if key in raw:
            kwargs[key] = _numbers('exit', key, raw[key])
    for key in ('a_factor', 'target', 'mass_bound', 'radius_bound', 'gamma_floor'):
        if key in raw:
            kwargs[key] = _number('exit', key, raw[key])
    return ExitCheckConfig(**kwargs)


def _query(parser, params):
    raw = _section(parser, 'query')
    query = {'quantity': raw.get('quantity', 'kernel').strip()}
    if query['quantity'] not in QUANTITIES:
        raise ConfigError('query.quantity', f"must be one of {list(QUANTITIES)}, got {query['quantity']!r}")
    if 't' in raw:
        query['t'] = _number('query', 't', raw['t'])
        if not query['t'] > 0:
            raise ConfigError('query.t', f"must be > 0, got {query['t']!r}")
    for key in ('x', 'y'):
        if key in raw:
            query[key] = _point('query', key, raw[key], params.d)
    if 'r' in raw:
        query['r'] = _numbers('query', 'r', raw['r'])
    return query


def _output_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ConfigError('run.output', f"cannot create {path}: {e}")
    if not os.access(path, os.W_OK):
        raise ConfigError('run.output', f"{path} is not writable")
    return path


def parse_config(source, overrides=None):
    """
    Build a validated RunConfig from an INI file path or a {section: {key: value}}
    mapping, then apply 'section.key=value' overrides.
    """
    parser = _read(source, overrides)
    run = _section(parser, 'run')
    command = run.get('command', '').strip()
    if command not in COMMANDS:
        raise ConfigError('run.command', f"must be one of {list(COMMANDS)}, got {command!r}")
    if 'seed' not in run:
        raise ConfigError('run.seed', "is required (runs are seeded explicitly)")
    seed = _number('run', 'seed', run['seed'], int)
    model = _section(parser, 'model')
    for key in ('d', 'alpha'):
        if key not in model:
            raise ConfigError(f"model.{key}", "is required")
    params = ModelParams(d=_number('model', 'd', model['d'], int), alpha=_number('model', 'alpha', model['alpha']),
                         m=_number('model', 'm', model['m']) if 'm' in model else 0.0)
    mc = _mc_config(parser, seed)
    domain_text = _section(parser, 'domain').get('spec')
    domain = parse_domain(domain_text, params.d) if domain_text else None
    if command in ('simulate', 'estimate') and domain is None:
        raise ConfigError('domain.spec', f"is required for the {command} command")
    axis = _section(parser, 'plot').get('axis', 't').strip()
    if axis not in AXES:
        raise ConfigError('plot.axis', f"must be one of {sorted(AXES)}, got {axis!r}")
    output = run.get('output', '').strip() or os.path.join(Config.RESULTS_DIR, command)
    return RunConfig(
        command=command,
        seed=seed,
        params=params,
        output_dir=_output_dir(output),
        mc=mc,
        domain=domain,
        sweep=_sweep_config(parser, params, domain, mc) if command == 'sweep' else None,
        exit_check=_exit_config(parser, params, mc) if command == 'exit-check' else None,
        query=_query(parser, params),
        plot_axis=axis,
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog='relkernel',
        description="Heat kernels, Green functions and Monte Carlo checks for killed relativistic stable processes")
    parser.add_argument('--version', action='version', version=f"relkernel {__version__}")
    parser.add_argument('command', choices=COMMANDS, help="what to run")
    parser.add_argument('--config', required=True, help="INI run file")
    parser.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help="override one config entry (repeatable)")
    parser.add_argument('--seed', type=int, default=None, help="override run.seed")
    parser.add_argument('--output', default=None, help="override run.output")
    parser.add_argument('--verbose', '-v', action='store_true', help="debug logging")
    return parser


def main(argv=None):
    """Exit code 0 on PASS (or a finished non-verdict command), 2 on FAIL, 1 on errors"""
    from relkernel.core import RelKernelCore

    args = build_parser().parse_args(argv)
    if args.verbose:
        set_level('DEBUG')
    overrides = [f"run.command={args.command}"] + list(args.set)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.output is not None:
        overrides.append(f"run.output={args.output}")
    try:
        run_config = parse_config(args.config, overrides)
    except ConfigError as e:
        print(f"❌ Invalid configuration: {e}")
        return 1
    return RelKernelCore(run_config).execute()
