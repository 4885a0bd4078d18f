"""
Separation sweeps: run configuration, row computation, summaries and
CSV / JSON-lines emission.
"""
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, TextIO, Tuple, Union

import numpy as np

from database import ResultCache, cache_key
from dielectric import PermittivityModel, load_optical_table, parse_material
from errors import CasimirError, ConfigError
from geometry import (AxisymmetricProfile, coefficient_table, gradient_correction, paraboloid,
                      pfa_free_energy, sphere, theta1)
from kernel import provider_for
from lifshitz import PlatePair, build_grid, plate_quantities
from monitoring import SweepMonitor, get_monitor
from numerics import QuadratureSpec
from solver_config import CACHE_CONFIG, DIFF_CONFIG, GEOMETRY_CONFIG, HBAR_C, K_B, OUTPUT_CONFIG, SERIES_CONFIG

logger = logging.getLogger(__name__)

COMMANDS = ('pp', 'theta1', 'profile')
GEOMETRIES = ('sphere', 'paraboloid', 'custom')
OUTPUT_FORMATS = ('csv', 'jsonl')


@dataclass(frozen=True)
class RunConfig:
    command: str = 'theta1'
    sphere_material: str = 'gold-drude'
    plate_material: str = 'gold-drude'
    plasma_frequency: Optional[float] = None  # eV
    damping: Optional[float] = None  # eV
    epsilon: Optional[float] = None
    optical_file: Optional[str] = None
    temperature: Union[float, str] = 300.0  # K or 'zero'
    geometry: str = 'sphere'
    c1: Optional[float] = None
    higher_coefficients: Tuple[float, ...] = ()  # c2, c3, ... for GEOMETRY = 'custom'
    radius: Optional[float] = None  # nm, profile command only
    d_min: float = 10.0  # nm
    d_max: float = 10000.0  # nm
    points: int = 40
    spacing: str = 'log'
    sum_tol: float = SERIES_CONFIG['rel_tol']
    quad_tol: float = 1e-9
    diff_levels: int = DIFF_CONFIG['kernel_levels']
    output_format: str = OUTPUT_CONFIG['default_format']
    output: Optional[str] = None
    workers: int = 1
    cache_dir: str = CACHE_CONFIG['directory']
    use_cache: bool = True
    timing: bool = False

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ConfigError('; '.join(errors))

    def validate(self) -> List[str]:
        errors = []
        if self.command not in COMMANDS:
            errors.append(f"command must be one of {', '.join(COMMANDS)}")
        if not self.points >= 1:
            errors.append(f"POINTS must be >= 1, got {self.points}")
        if not self.d_min > 0.0:
            errors.append(f"D_MIN must be > 0 nm, got {self.d_min}")
        if self.points > 1 and not self.d_max > self.d_min:
            errors.append(f"D_MAX must exceed D_MIN ({self.d_max} <= {self.d_min})")
        if self.spacing not in ('log', 'linear'):
            errors.append(f"SPACING must be 'log' or 'linear', got {self.spacing!r}")
        if self.temperature != 'zero' and not (isinstance(self.temperature, (int, float)) and self.temperature >= 0):
            errors.append(f"TEMPERATURE must be >= 0 K or 'zero', got {self.temperature!r}")
        if self.geometry not in GEOMETRIES:
            errors.append(f"GEOMETRY must be one of {', '.join(GEOMETRIES)}")
        if self.geometry == 'custom' and self.c1 is None:
            errors.append("GEOMETRY = 'custom' needs C1")
        if self.higher_coefficients and self.geometry != 'custom':
            errors.append("HIGHER_COEFFICIENTS needs GEOMETRY = 'custom'")
        if self.command == 'profile' and not (self.radius and self.radius > 0.0):
            errors.append("profile command needs RADIUS > 0 nm")
        if not 0.0 < self.sum_tol < 1.0 or not 0.0 < self.quad_tol < 1.0:
            errors.append("tolerances must lie in (0, 1)")
        if self.diff_levels < 1:
            errors.append("DIFF_LEVELS must be >= 1")
        if self.output_format not in OUTPUT_FORMATS:
            errors.append(f"OUTPUT_FORMAT must be one of {', '.join(OUTPUT_FORMATS)}")
        if self.workers < 1:
            errors.append("WORKERS must be >= 1")
        uses_table = 'tabulated' in (self.sphere_material.lower(), self.plate_material.lower())
        if uses_table and not self.optical_file:
            errors.append("tabulated material needs OPTICAL_FILE")
        return errors

    @property
    def c1_value(self) -> float:
        if self.geometry == 'sphere':
            return 0.25
        if self.geometry == 'paraboloid':
            return 0.0
        return float(self.c1)

    def separations(self) -> np.ndarray:
        if self.points == 1:
            return np.array([float(self.d_min)])
        if self.spacing == 'log':
            return np.geomspace(self.d_min, self.d_max, self.points)
        return np.linspace(self.d_min, self.d_max, self.points)

    def canonical(self) -> Dict:
        """Settings that change results; output, worker and cache settings are left out"""
        ignored = {'output', 'workers', 'cache_dir', 'use_cache', 'timing', 'output_format'}
        return {k: v for k, v in sorted(asdict(self).items()) if k not in ignored}

    def input_files(self) -> Tuple[str, ...]:
        uses_table = 'tabulated' in (self.sphere_material.lower(), self.plate_material.lower())
        return (self.optical_file,) if uses_table and self.optical_file else ()


def _material_spec(spec: str, epsilon: Optional[float]) -> str:
    if spec.strip().lower() == 'constant' and epsilon is not None:
        return f"constant:{epsilon}"
    return spec


@lru_cache(maxsize=8)
def build_materials(config: RunConfig) -> Tuple[PermittivityModel, PermittivityModel]:
    """(curved, flat) permittivity models; the optical table is read once per process"""
    table = load_optical_table(config.optical_file) if config.input_files() else None
    models = tuple(parse_material(_material_spec(spec, config.epsilon), table,
                                  config.plasma_frequency, config.damping)
                   for spec in (config.sphere_material, config.plate_material))
    return models


def build_pair(config: RunConfig, d: float) -> PlatePair:
    sphere_model, plate_model = build_materials(config)
    return PlatePair(sphere_model, plate_model, build_grid(config.temperature, d, config.sum_tol))


def thermal_axis(config: RunConfig, d: float) -> Optional[float]:
    """log10(2 pi d / lambda_T); None at T = 0"""
    if config.temperature == 'zero' or config.temperature == 0:
        return None
    wavelength = HBAR_C / (K_B * float(config.temperature))
    return math.log10(2.0 * math.pi * d / wavelength)


@dataclass
class ResultRow:
    d: float
    values: Dict[str, Optional[float]]
    converged: bool
    flags: Tuple[str, ...] = ()
    wall_time: float = 0.0
    diagnostics: Dict = field(default_factory=dict)

    def record(self) -> Dict:
        return {'d': self.d, 'values': self.values, 'converged': self.converged,
                'flags': list(self.flags), 'wall_time': self.wall_time}

    @classmethod
    def from_record(cls, record: Dict) -> 'ResultRow':
        return cls(float(record['d']), dict(record['values']), bool(record['converged']),
                   tuple(record.get('flags', ())), float(record.get('wall_time', 0.0)))


def compute_row(config: RunConfig, d: float) -> ResultRow:
    """One separation of the sweep; solver failures are recorded in the row"""
    started = time.perf_counter()
    values: Dict[str, Optional[float]] = {'d_nm': d}
    axis = thermal_axis(config, d)
    if axis is not None:
        values['log10_2pi_d_over_lambda_T'] = axis
    flags: List[str] = []
    diagnostics: Dict = {}
    converged = True

    try:
        pair = build_pair(config, d)
        provider = provider_for(pair.material1)
        if config.command == 'pp':
            plates = plate_quantities(pair, d)
            values.update(free_energy_pp=plates.free_energy, force_pp=plates.force)
            converged = plates.converged
            if not converged:
                flags.append('matsubara')
        elif config.command == 'theta1':
            result = theta1(pair, provider, d, config.c1_value, levels=config.diff_levels)
            values.update(free_energy_pp=result.free_energy, force_pp=result.force, beta=result.beta,
                          theta1=result.theta1, theta1_error=result.error)
            diagnostics = dict(result.diagnostics)
            diagnostics['delta_error'] = result.diagnostics.get('richardson_error')
            converged = result.converged
            if not converged:
                flags.append('theta1')
        else:
            profile = _profile(config, d)
            table = coefficient_table(pair, provider, profile, levels=config.diff_levels)
            spec = QuadratureSpec(rel_tol=config.quad_tol)
            pfa = pfa_free_energy(pair, profile, table=table, spec=spec)
            gradient = gradient_correction(pair, provider, profile, table=table, spec=spec)
            values.update(pfa=pfa.value, gradient_correction=gradient.value,
                          total=pfa.value + gradient.value, total_error=pfa.error + gradient.error)
            converged = pfa.converged and gradient.converged
            flags.extend(f"pfa:{f}" for f in pfa.flags)
            flags.extend(f"gradient:{f}" for f in gradient.flags)
    except CasimirError as e:
        logger.error(f"d={d} nm failed: {e}")
        converged = False
        flags.append(f"error:{type(e).__name__}")
        diagnostics['error'] = str(e)

    return ResultRow(d, values, converged, tuple(flags), time.perf_counter() - started, diagnostics)


def _profile(config: RunConfig, d: float) -> AxisymmetricProfile:
    if config.geometry == 'sphere':
        return sphere(d, config.radius)
    if config.geometry == 'paraboloid':
        return paraboloid(d, config.radius)
    return AxisymmetricProfile(d, config.radius, config.c1_value, tuple(config.higher_coefficients))


@dataclass
class SweepResult:
    rows: List[ResultRow]
    summary: Dict
    cache_hit: bool = False

    @property
    def all_converged(self) -> bool:
        return all(row.converged for row in self.rows)


def summarize(config: RunConfig, rows: List[ResultRow]) -> Dict:
    summary = {
        'command': config.command,
        'rows': len(rows),
        'converged_rows': sum(1 for row in rows if row.converged),
        'small_d_endpoint': dict(rows[0].values) if rows else None,
        'large_d_endpoint': dict(rows[-1].values) if rows else None,
    }
    if config.command == 'theta1':
        low, high = GEOMETRY_CONFIG['experimental_band']
        band = [row.values['theta1'] for row in rows
                if low <= row.d <= high and row.values.get('theta1') is not None]
        if band:
            summary['experimental_band'] = {
                'd_range_nm': [low, high],
                'theta1_min': min(band),
                'theta1_max': max(band),
                'exceeds_bound': max(abs(v) for v in band) > GEOMETRY_CONFIG['experimental_bound'],
            }
    return summary


def run_sweep(config: RunConfig, monitor: Optional[SweepMonitor] = None) -> SweepResult:
    """Rows for every separation of the grid, ordered by d"""
    monitor = monitor or get_monitor()
    separations = [float(d) for d in config.separations()]
    max_ratio = max(separations) / config.radius if config.radius else None
    monitor.log_sweep_event('sweep_started', {'command': config.command, 'points': len(separations),
                                              'max_d_over_r': max_ratio})

    cache = ResultCache(config.cache_dir) if config.use_cache else None
    key = cache_key(config.canonical(), config.input_files())
    if cache is not None:
        cache.init_db()
        records = cache.get(key)
        rows = None
        if records is not None:
            try:
                rows = [ResultRow.from_record(record) for record in records]
            except (KeyError, TypeError, ValueError):
                monitor.log_sweep_event('cache_corrupt', {'key': key})
        if rows is not None:
            monitor.log_sweep_event('cache_hit', {'key': key})
            result = SweepResult(rows, summarize(config, rows), cache_hit=True)
            monitor.log_sweep_event('sweep_finished', result.summary)
            return result
        monitor.log_sweep_event('cache_miss', {'key': key})

    if config.workers > 1 and len(separations) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(compute_row, [config] * len(separations), separations))
    else:
        rows = [compute_row(config, d) for d in separations]
    rows.sort(key=lambda row: row.d)

    for row in rows:
        event = {'d': row.d, 'converged': row.converged, 'flags': list(row.flags),
                 'wall_time': round(row.wall_time, 3)}
        for name in ('delta', 'delta_error', 'gamma_check'):
            if name in row.diagnostics:
                event[name] = row.diagnostics[name]
        monitor.log_sweep_event('row_completed', event)

    if cache is not None:
        cache.put(key, config.command, [row.record() for row in rows])

    result = SweepResult(rows, summarize(config, rows))
    monitor.log_sweep_event('sweep_finished', result.summary)
    return result


# --- emission ---------------------------------------------------------------------

def columns(rows: List[ResultRow], timing: bool = False) -> List[str]:
    names: List[str] = []
    for row in rows:
        names.extend(name for name in row.values if name not in names)
    names += ['converged', 'flags']
    return names + ['wall_time_s'] if timing else names


def _format(value) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return format(float(value), OUTPUT_CONFIG['float_format'])


def emit(rows: List[ResultRow], output_format: str = 'csv', stream: Optional[TextIO] = None,
         timing: bool = False) -> str:
    """Write rows as CSV (header + one line per row) or JSON lines; returns the text"""
    if not rows:
        raise ValueError("nothing to emit: no rows")
    if output_format not in OUTPUT_FORMATS:
        raise ConfigError(f"unknown output format {output_format!r}")
    names = columns(rows, timing)
    buffer = io.StringIO()

    if output_format == 'csv':
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(names)
        for row in rows:
            record = dict(row.values, converged=row.converged, flags=';'.join(row.flags),
                          wall_time_s=row.wall_time)
            writer.writerow([record[n] if n == 'flags' else _format(record.get(n)) for n in names])
    else:
        for row in rows:
            record = dict(row.values, converged=row.converged, flags=';'.join(row.flags),
                          wall_time_s=row.wall_time)
            buffer.write(json.dumps({n: record.get(n) for n in names}) + '\n')

    text = buffer.getvalue()
    if stream is not None:
        stream.write(text)
    return text
