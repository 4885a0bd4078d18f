"""
Command-line front end.

    python cli.py theta1 --config run.py
    python cli.py pp --material perfect-conductor --temperature zero --d-min 100 --points 1
    python cli.py profile --geometry sphere --radius 1e5 --d-min 100 --d-max 1000 --points 5
    python cli.py validate [--full]

Run configuration files hold one `KEY = value` Python literal per line (see
config.example.py). They are parsed with ast and never executed.
"""
import argparse
import ast
import json
import logging
import sys
from dataclasses import fields
from typing import Dict, Optional, Sequence

from errors import CasimirError, ConfigError
from monitoring import configure_logging, get_monitor
from sweep import RunConfig, emit, run_sweep

logger = logging.getLogger(__name__)

NUMBER = (int, float)

# key -> (RunConfig field, accepted types)
CONFIG_KEYS = {
    'MATERIAL': (None, str),
    'SPHERE_MATERIAL': ('sphere_material', str),
    'PLATE_MATERIAL': ('plate_material', str),
    'PLASMA_FREQUENCY': ('plasma_frequency', NUMBER),
    'DAMPING': ('damping', NUMBER),
    'EPSILON': ('epsilon', NUMBER),
    'OPTICAL_FILE': ('optical_file', str),
    'TEMPERATURE': ('temperature', NUMBER + (str,)),
    'GEOMETRY': ('geometry', str),
    'C1': ('c1', NUMBER),
    'HIGHER_COEFFICIENTS': ('higher_coefficients', (list, tuple)),
    'RADIUS': ('radius', NUMBER),
    'D_MIN': ('d_min', NUMBER),
    'D_MAX': ('d_max', NUMBER),
    'POINTS': ('points', int),
    'SPACING': ('spacing', str),
    'SUM_TOL': ('sum_tol', NUMBER),
    'QUAD_TOL': ('quad_tol', NUMBER),
    'DIFF_LEVELS': ('diff_levels', int),
    'OUTPUT_FORMAT': ('output_format', str),
    'OUTPUT': ('output', str),
    'WORKERS': ('workers', int),
    'CACHE_DIR': ('cache_dir', str),
    'USE_CACHE': ('use_cache', bool),
    'TIMING': ('timing', bool),
}

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2


def _check_type(key: str, value, expected, line: int):
    accepted = expected if isinstance(expected, tuple) else (expected,)
    if value is None:
        return
    if isinstance(value, bool) and bool not in accepted or not isinstance(value, accepted):
        names = ' or '.join(t.__name__ for t in accepted)
        raise ConfigError(f"line {line}: {key} must be {names}, got {type(value).__name__}")


def read_config_text(text: str, source: str = '<config>') -> Dict[str, object]:
    """KEY = literal assignments -> {KEY: value}; keys are case-insensitive"""
    try:
        tree = ast.parse(text, filename=source)
    except SyntaxError as e:
        raise ConfigError(f"{source}: line {e.lineno}: {e.msg}") from e

    values: Dict[str, object] = {}
    for node in tree.body:
        if isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant) and isinstance(node.value.value, str):
            continue
        if not (isinstance(node, ast.Assign) and len(node.targets) == 1 and isinstance(node.targets[0], ast.Name)):
            raise ConfigError(f"{source}: line {node.lineno}: expected KEY = value")
        key = node.targets[0].id.upper()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}: line {node.lineno}: unknown key {key}; valid keys: {', '.join(CONFIG_KEYS)}")
        try:
            value = ast.literal_eval(node.value)
        except ValueError as e:
            raise ConfigError(f"{source}: line {node.lineno}: {key} must be a literal") from e
        _check_type(key, value, CONFIG_KEYS[key][1], node.lineno)
        values[key] = value
    return values


def _to_fields(values: Dict[str, object]) -> Dict[str, object]:
    if 'MATERIAL' in values and ('SPHERE_MATERIAL' in values or 'PLATE_MATERIAL' in values):
        raise ConfigError("conflicting material spec: MATERIAL together with SPHERE_MATERIAL/PLATE_MATERIAL")
    out = {}
    for key, value in values.items():
        if key == 'MATERIAL':
            out['sphere_material'] = out['plate_material'] = value
        else:
            out[CONFIG_KEYS[key][0]] = value
    if out.get('higher_coefficients') is not None:
        coefficients = out['higher_coefficients']
        if not all(isinstance(c, NUMBER) and not isinstance(c, bool) for c in coefficients):
            raise ConfigError(f"HIGHER_COEFFICIENTS must be a list of numbers, got {coefficients!r}")
        out['higher_coefficients'] = tuple(float(c) for c in coefficients)
    if isinstance(out.get('temperature'), str):
        if out['temperature'].lower() != 'zero':
            raise ConfigError(f"TEMPERATURE must be a number or 'zero', got {out['temperature']!r}")
        out['temperature'] = 'zero'
    elif out.get('temperature') is not None:
        out['temperature'] = float(out['temperature'])
    return out


def parse_config(command: str, config_path: Optional[str] = None,
                 overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """File values first, then flag overrides (flags win)"""
    file_fields: Dict[str, object] = {}
    if config_path:
        try:
            with open(config_path, encoding='utf-8') as handle:
                text = handle.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file {config_path}: {e}") from e
        file_fields = _to_fields(read_config_text(text, config_path))

    flag_fields = _to_fields({k: v for k, v in (overrides or {}).items() if v is not None})
    if 'sphere_material' in flag_fields and (overrides or {}).get('MATERIAL') is not None:
        file_fields.pop('sphere_material', None)
        file_fields.pop('plate_material', None)

    merged = dict(file_fields)
    merged.update(flag_fields)
    return RunConfig(command=command, **merged)


def build_parser() -> argparse.ArgumentParser:
    defaults = {f.name: f.default for f in fields(RunConfig)}
    parser = argparse.ArgumentParser(
        prog='casimir', description='Casimir free energy, PFA and gradient-expansion corrections')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--log-file', default=None, help='also log to this file')
    sub = parser.add_subparsers(dest='command', required=True)

    sweep_parent = argparse.ArgumentParser(add_help=False)
    group = sweep_parent.add_argument_group('run configuration (flags override --config)')
    group.add_argument('--config', help='KEY = value run configuration file')
    group.add_argument('--material', help='both plates, e.g. gold-drude, perfect-conductor, drude:9,0.035, '
                                          'plasma:9, constant:10, vacuum, tabulated')
    group.add_argument('--sphere-material', help=f"curved body (default {defaults['sphere_material']})")
    group.add_argument('--plate-material', help=f"flat plate (default {defaults['plate_material']})")
    group.add_argument('--plasma-frequency', type=float, help='eV, overrides the gold preset')
    group.add_argument('--damping', type=float, help='eV, overrides the gold preset')
    group.add_argument('--epsilon', type=float, help="static permittivity for 'constant'")
    group.add_argument('--optical-file', help="energy(eV) Im_eps table for 'tabulated'")
    group.add_argument('--temperature', help=f"kelvin or 'zero' (default {defaults['temperature']})")
    group.add_argument('--geometry', choices=['sphere', 'paraboloid', 'custom'],
                       help=f"profile preset (default {defaults['geometry']})")
    group.add_argument('--c1', type=float, help='quartic coefficient for --geometry custom')
    group.add_argument('--higher-coefficients', type=float, nargs='+', metavar='C',
                       help='c2 c3 ... of H = d + sum_j c_j rho^(2j+2) / (2 R^(2j+1)) for --geometry custom')
    group.add_argument('--radius', type=float, help='curvature radius in nm (profile command)')
    group.add_argument('--d-min', type=float, help=f"nm (default {defaults['d_min']})")
    group.add_argument('--d-max', type=float, help=f"nm (default {defaults['d_max']})")
    group.add_argument('--points', type=int, help=f"default {defaults['points']}")
    group.add_argument('--spacing', choices=['log', 'linear'], help=f"default {defaults['spacing']}")
    group.add_argument('--sum-tol', type=float, help=f"Matsubara tolerance (default {defaults['sum_tol']:g})")
    group.add_argument('--quad-tol', type=float, help=f"functional quadrature tolerance (default {defaults['quad_tol']:g})")
    group.add_argument('--diff-levels', type=int, help=f"Richardson levels (default {defaults['diff_levels']})")
    group.add_argument('--format', dest='output_format', choices=['csv', 'jsonl'], help='default csv')
    group.add_argument('--output', help='write rows here instead of stdout')
    group.add_argument('--workers', type=int, help='parallel processes (default 1)')
    group.add_argument('--cache-dir', help=f"default {defaults['cache_dir']}")
    group.add_argument('--no-cache', dest='use_cache', action='store_const', const=False)
    group.add_argument('--timing', action='store_const', const=True, help='emit a wall_time_s column')

    sub.add_parser('pp', parents=[sweep_parent], help='parallel plates: F_pp and force per area vs d')
    sub.add_parser('theta1', parents=[sweep_parent], help='theta1(d) sweep')
    sub.add_parser('profile', parents=[sweep_parent], help='PFA + gradient correction of an axisymmetric profile')
    validate = sub.add_parser('validate', help='run the built-in oracle suite')
    validate.add_argument('--full', action='store_true', help='include the finite-temperature gold oracles')
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    temperature = args.temperature
    if temperature is not None and temperature.lower() != 'zero':
        try:
            temperature = float(temperature)
        except ValueError:
            raise ConfigError(f"--temperature must be a number or 'zero', got {temperature!r}")
    return {
        'MATERIAL': args.material,
        'SPHERE_MATERIAL': args.sphere_material,
        'PLATE_MATERIAL': args.plate_material,
        'PLASMA_FREQUENCY': args.plasma_frequency,
        'DAMPING': args.damping,
        'EPSILON': args.epsilon,
        'OPTICAL_FILE': args.optical_file,
        'TEMPERATURE': temperature,
        'GEOMETRY': args.geometry,
        'C1': args.c1,
        'HIGHER_COEFFICIENTS': args.higher_coefficients,
        'RADIUS': args.radius,
        'D_MIN': args.d_min,
        'D_MAX': args.d_max,
        'POINTS': args.points,
        'SPACING': args.spacing,
        'SUM_TOL': args.sum_tol,
        'QUAD_TOL': args.quad_tol,
        'DIFF_LEVELS': args.diff_levels,
        'OUTPUT_FORMAT': args.output_format,
        'OUTPUT': args.output,
        'WORKERS': args.workers,
        'CACHE_DIR': args.cache_dir,
        'USE_CACHE': args.use_cache,
        'TIMING': args.timing,
    }


def _run_validate(full: bool) -> int:
    from oracles import validate

    report = validate(full=full)
    for check in report['checks']:
        mark = 'ok  ' if check['passed'] else ('info' if check.get('informational') else 'FAIL')
        print(f"{mark} {check['name']}: {check['value']:.6g} (expected {check['expected']:.6g})")
    for error in report['errors']:
        print(f"error: {error}", file=sys.stderr)
    for warning in report['warnings']:
        print(f"note: {warning}", file=sys.stderr)
    return EXIT_OK if report['valid'] else EXIT_NOT_CONVERGED


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(getattr(logging, args.log_level), args.log_file)

    if args.command == 'validate':
        return _run_validate(args.full)

    try:
        config = parse_config(args.command, args.config, _overrides(args))
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        result = run_sweep(config)
    except CasimirError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    if config.output:
        try:
            with open(config.output, 'w', encoding='utf-8', newline='') as handle:
                emit(result.rows, config.output_format, handle, config.timing)
        except OSError as e:
            print(f"error: cannot write {config.output}: {e}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
    else:
        emit(result.rows, config.output_format, sys.stdout, config.timing)

    print(json.dumps(result.summary, indent=2, default=str), file=sys.stderr)
    health = get_monitor().health_summary()
    logger.info(f"sweep status: {health['overall_status']} ({health['converged_rows']}/{health['rows']} rows converged)")
    return EXIT_OK if result.all_converged else EXIT_NOT_CONVERGED


if __name__ == '__main__':
    sys.exit(main())
