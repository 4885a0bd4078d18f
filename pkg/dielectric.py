"""
Dielectric response at imaginary frequency: permittivity models, Fresnel
coefficients, Kramers-Kronig transform of tabulated optical data.

Units: frequencies and photon energies in eV, wave numbers in 1/nm,
kappa = xi / (hbar c).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from errors import DomainError, OpticalDataError, UnsupportedOperationError
from numerics import QuadratureSpec, integrate
from solver_config import DIELECTRIC_CONFIG, HBAR_C

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PerfectConductor:
    """Ideal mirror: (r_E, r_M) = (1, -1) at every frequency and momentum"""


@dataclass(frozen=True)
class Drude:
    plasma_frequency: float  # eV
    damping: float  # eV

    def __post_init__(self):
        if not self.plasma_frequency > 0.0:
            raise DomainError(f"plasma frequency must be > 0, got {self.plasma_frequency}")
        if not self.damping >= 0.0:
            raise DomainError(f"damping must be >= 0, got {self.damping}")


@dataclass(frozen=True)
class Plasma:
    plasma_frequency: float  # eV

    def __post_init__(self):
        if not self.plasma_frequency > 0.0:
            raise DomainError(f"plasma frequency must be > 0, got {self.plasma_frequency}")


@dataclass(frozen=True)
class Constant:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon >= 1.0:
            raise DomainError(f"constant permittivity must be >= 1, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class OpticalTable:
    """Im eps sampled at strictly increasing photon energies (eV)"""
    energies: np.ndarray
    im_eps: np.ndarray

    def __post_init__(self):
        energies = np.array(self.energies, dtype=float)
        im_eps = np.array(self.im_eps, dtype=float)
        if energies.ndim != 1 or energies.shape != im_eps.shape:
            raise OpticalDataError("energies and Im eps must be 1-d arrays of equal length")
        if len(energies) < 2:
            raise OpticalDataError("optical table needs at least 2 rows")
        if np.any(energies <= 0.0) or np.any(np.diff(energies) <= 0.0):
            raise OpticalDataError("photon energies must be positive and strictly increasing")
        if np.any(im_eps < 0.0) or not np.all(np.isfinite(im_eps)):
            raise OpticalDataError("Im eps must be finite and >= 0")
        energies.setflags(write=False)
        im_eps.setflags(write=False)
        object.__setattr__(self, 'energies', energies)
        object.__setattr__(self, 'im_eps', im_eps)

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def omega_min(self) -> float:
        return float(self.energies[0])

    @property
    def omega_max(self) -> float:
        return float(self.energies[-1])

    def interpolate(self, omega: np.ndarray) -> np.ndarray:
        """Im eps between samples, log-log linear (linear where a sample is zero)"""
        omega = np.asarray(omega, dtype=float)
        index = np.clip(np.searchsorted(self.energies, omega, side='right') - 1, 0, len(self) - 2)
        w0, w1 = self.energies[index], self.energies[index + 1]
        y0, y1 = self.im_eps[index], self.im_eps[index + 1]
        t = np.log(omega / w0) / np.log(w1 / w0)
        positive = (y0 > 0.0) & (y1 > 0.0)
        log_ratio = np.log(np.where(positive, y1, 1.0) / np.where(positive, y0, 1.0))
        loglog = y0 * np.exp(t * log_ratio)
        linear = y0 + (omega - w0) / (w1 - w0) * (y1 - y0)
        return np.where(positive, loglog, linear)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Optical data with a Drude form below the lowest tabulated energy"""
    table: OpticalTable
    extrapolation: Drude
    cache: 'PermittivityCache' = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'cache', PermittivityCache(self.table, self.extrapolation))


PermittivityModel = Union[PerfectConductor, Drude, Plasma, Constant, Tabulated]


def gold_drude(plasma_frequency: Optional[float] = None, damping: Optional[float] = None) -> Drude:
    """Drude gold, Omega_p = 9 eV and gamma = 35 meV unless overridden"""
    return Drude(plasma_frequency if plasma_frequency is not None else DIELECTRIC_CONFIG['gold_plasma_frequency'],
                 damping if damping is not None else DIELECTRIC_CONFIG['gold_damping'])


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def _check_frequency(xi: np.ndarray):
    if np.any(~(xi > 0.0)):
        raise DomainError("imaginary frequency xi must be > 0 (use the zero-frequency limits at xi = 0)")


def permittivity(model: PermittivityModel, xi: ArrayLike) -> ArrayLike:
    """eps(i xi) for xi > 0 (eV); vectorised over xi"""
    xi = np.asarray(xi, dtype=float)
    _check_frequency(xi)
    if isinstance(model, PerfectConductor):
        raise UnsupportedOperationError(
            "perfect conductor has no finite permittivity; use reflection() which returns (1, -1)")
    if isinstance(model, Drude):
        eps = 1.0 + model.plasma_frequency ** 2 / (xi * (xi + model.damping))
    elif isinstance(model, Plasma):
        eps = 1.0 + (model.plasma_frequency / xi) ** 2
    elif isinstance(model, Constant):
        eps = np.full(xi.shape, model.epsilon)
    elif isinstance(model, Tabulated):
        eps = model.cache(xi)
    else:
        raise UnsupportedOperationError(f"unknown permittivity model {model!r}")
    return _scalar_or_array(eps)


# --- Kramers-Kronig -----------------------------------------------------------

def _drude_below(extrapolation: Drude, omega_0: float, xi: np.ndarray) -> np.ndarray:
    """int_0^omega_0 omega Im eps_Drude / (omega^2 + xi^2) d omega, in closed form"""
    plasma2 = extrapolation.plasma_frequency ** 2
    gamma = extrapolation.damping
    if gamma == 0.0:
        # Im eps is a delta function at omega = 0
        return 0.5 * math.pi * plasma2 / xi ** 2

    def atan_over(c):
        return np.arctan(omega_0 / c) / c

    with np.errstate(divide='ignore', invalid='ignore'):
        general = plasma2 * gamma * (atan_over(gamma) - atan_over(xi)) / (xi ** 2 - gamma ** 2)
    c = 0.5 * (xi + gamma)
    # derivative form where xi ~ gamma makes the difference quotient cancel
    near = plasma2 * gamma * (np.arctan(omega_0 / c) / c ** 2 + omega_0 / (c * (c ** 2 + omega_0 ** 2))) / (2.0 * c)
    return np.where(np.abs(xi - gamma) < 1e-4 * gamma, near, general)


def high_frequency_tail(table: OpticalTable, xi: ArrayLike) -> ArrayLike:
    """Contribution above the table, Im eps continued as omega^-3 from the last sample"""
    xi = np.asarray(xi, dtype=float)
    x = xi / table.omega_max
    small = x < DIELECTRIC_CONFIG['kk_series_threshold']
    safe = np.where(small, 1.0, x)
    exact = (1.0 - np.arctan(safe) / safe) / safe ** 2
    series = 1.0 / 3.0 - x ** 2 / 5.0 + x ** 4 / 7.0
    return _scalar_or_array(table.im_eps[-1] * np.where(small, series, exact))


def _table_rule(table: OpticalTable) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss nodes in ln(omega) following the table, panels no wider than kk_max_panel_width"""
    order = DIELECTRIC_CONFIG['kk_panel_order']
    width = DIELECTRIC_CONFIG['kk_max_panel_width']
    x, w = np.polynomial.legendre.leggauss(order)
    log_nodes = np.log(table.energies)
    edges = [log_nodes[0]]
    for lo, hi in zip(log_nodes[:-1], log_nodes[1:]):
        pieces = max(1, int(math.ceil((hi - lo) / width)))
        edges.extend(np.linspace(lo, hi, pieces + 1)[1:])
    edges = np.asarray(edges)
    half = 0.5 * np.diff(edges)
    t = (edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return t, weights


def kramers_kronig(table: OpticalTable, extrapolation: Drude, xi: ArrayLike,
                   block: int = 64) -> ArrayLike:
    """eps(i xi) = 1 + (2/pi) int_0^inf omega Im eps(omega) / (omega^2 + xi^2) d omega"""
    xi = np.asarray(xi, dtype=float)
    _check_frequency(xi)
    t, weights = _table_rule(table)
    omega = np.exp(t)
    im_eps = table.interpolate(omega)
    flat = xi.ravel()
    inside = np.empty_like(flat)
    for start in range(0, len(flat), block):
        chunk = flat[start:start + block, None]
        # omega Im eps / (omega^2 + xi^2) d omega = Im eps / (1 + (xi/omega)^2) dt
        inside[start:start + block] = np.sum(weights * im_eps / (1.0 + (chunk / omega) ** 2), axis=1)
    inside = inside.reshape(xi.shape)
    below = _drude_below(extrapolation, table.omega_min, xi)
    above = high_frequency_tail(table, xi)
    return _scalar_or_array(1.0 + (2.0 / math.pi) * (below + inside + above))


class PermittivityCache:
    """Log-spaced xi cache of a tabulated permittivity.

    eps - 1 is splined in log-log; requests outside the cached window fall
    back to the direct transform.
    """

    def __init__(self, table: OpticalTable, extrapolation: Drude,
                 points: int = DIELECTRIC_CONFIG['cache_points'],
                 xi_min: float = DIELECTRIC_CONFIG['cache_xi_min'],
                 xi_max: float = DIELECTRIC_CONFIG['cache_xi_max']):
        self.table = table
        self.extrapolation = extrapolation
        self.xi_min = xi_min
        self.xi_max = xi_max
        self.xi_grid = np.geomspace(xi_min, xi_max, points)
        values = kramers_kronig(table, extrapolation, self.xi_grid)
        self._spline = CubicSpline(np.log(self.xi_grid), np.log(values - 1.0))
        logger.debug(f"permittivity cache built: {points} points on [{xi_min:g}, {xi_max:g}] eV")

    def __call__(self, xi: ArrayLike) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        inside = (xi >= self.xi_min) & (xi <= self.xi_max)
        result = np.empty(xi.shape)
        if np.any(inside):
            result[inside] = 1.0 + np.exp(self._spline(np.log(xi[inside])))
        if np.any(~inside):
            result[~inside] = kramers_kronig(self.table, self.extrapolation, xi[~inside])
        return result

    def max_relative_error(self, at: Optional[Iterable[float]] = None) -> float:
        """Largest relative deviation from the direct transform at the given frequencies
        (default: geometric midpoints of the cache grid)"""
        if at is None:
            at = np.sqrt(self.xi_grid[:-1] * self.xi_grid[1:])
        at = np.asarray(list(at), dtype=float)
        direct = kramers_kronig(self.table, self.extrapolation, at)
        return float(np.max(np.abs(self(at) / direct - 1.0)))


def drude_optical_table(model: Drude, omega_min: float = 1e-3, omega_max: float = 1e3,
                        points: int = 600) -> OpticalTable:
    """Synthetic table of Im eps = Omega_p^2 gamma / (omega (omega^2 + gamma^2))"""
    omega = np.geomspace(omega_min, omega_max, points)
    im_eps = model.plasma_frequency ** 2 * model.damping / (omega * (omega ** 2 + model.damping ** 2))
    return OpticalTable(omega, im_eps)


def kramers_kronig_reference(table: OpticalTable, extrapolation: Drude, xi: float) -> float:
    """Scalar adaptive evaluation of the table integral, for cross-checks"""
    spec = QuadratureSpec(rel_tol=1e-10, max_subdivisions=500)
    log_min, log_max = math.log(table.omega_min), math.log(table.omega_max)

    def integrand(t: float) -> float:
        omega = math.exp(t)
        return float(table.interpolate(omega)) / (1.0 + (xi / omega) ** 2)

    inside = integrate(integrand, log_min, log_max, spec).value
    below = float(_drude_below(extrapolation, table.omega_min, np.asarray(xi)))
    above = float(high_frequency_tail(table, xi))
    return 1.0 + (2.0 / math.pi) * (below + inside + above)


# --- Fresnel coefficients -----------------------------------------------------

@dataclass(frozen=True)
class ReflectionPair:
    r_e: ArrayLike  # TM
    r_m: ArrayLike  # TE

    def __iter__(self):
        return iter((self.r_e, self.r_m))


def fresnel(eps: ArrayLike, kappa: ArrayLike, k: ArrayLike) -> ReflectionPair:
    """Fresnel coefficients written without the eps q - s cancellation"""
    eps = np.asarray(eps, dtype=float)
    kappa2 = np.asarray(kappa, dtype=float) ** 2
    k2 = np.asarray(k, dtype=float) ** 2
    q = np.sqrt(k2 + kappa2)
    s = np.sqrt(k2 + eps * kappa2)
    with np.errstate(invalid='ignore', divide='ignore'):
        r_e = (eps - 1.0) * ((eps + 1.0) * k2 + eps * kappa2) / (eps * q + s) ** 2
        r_m = -(eps - 1.0) * kappa2 / (q + s) ** 2
    # k = kappa = 0 only reaches here through explicit zero-frequency calls
    r_e = np.where((q == 0.0), 0.0, r_e)
    r_m = np.where((q == 0.0), 0.0, r_m)
    return ReflectionPair(_scalar_or_array(r_e), _scalar_or_array(r_m))


def reflection(model: PermittivityModel, xi: ArrayLike, k: ArrayLike) -> ReflectionPair:
    """(r_E, r_M) at imaginary frequency xi (eV) and in-plane momentum k (1/nm)"""
    xi = np.asarray(xi, dtype=float)
    k = np.asarray(k, dtype=float)
    _check_frequency(xi)
    if np.any(~(k >= 0.0)):
        raise DomainError("in-plane momentum k must be >= 0")
    if isinstance(model, PerfectConductor):
        shape = np.broadcast(xi, k).shape
        return ReflectionPair(_scalar_or_array(np.ones(shape)), _scalar_or_array(-np.ones(shape)))
    return fresnel(permittivity(model, xi), xi / HBAR_C, k)


@dataclass(frozen=True)
class ZeroFrequencyLimit:
    """xi -> 0 behaviour of a material.

    kind: 'perfect', 'conductor' (eps kappa^2 -> 0), 'plasma'
    (eps kappa^2 -> screening), or 'dielectric' (eps -> epsilon).
    """
    kind: str
    epsilon: float = math.inf
    screening: float = 0.0  # 1/nm^2


def zero_frequency_limit(model: PermittivityModel) -> ZeroFrequencyLimit:
    if isinstance(model, PerfectConductor):
        return ZeroFrequencyLimit('perfect')
    if isinstance(model, Tabulated):
        return zero_frequency_limit(model.extrapolation)
    if isinstance(model, Drude):
        if model.damping > 0.0:
            return ZeroFrequencyLimit('conductor')
        return ZeroFrequencyLimit('plasma', screening=(model.plasma_frequency / HBAR_C) ** 2)
    if isinstance(model, Plasma):
        return ZeroFrequencyLimit('plasma', screening=(model.plasma_frequency / HBAR_C) ** 2)
    if isinstance(model, Constant):
        return ZeroFrequencyLimit('dielectric', epsilon=model.epsilon)
    raise UnsupportedOperationError(f"unknown permittivity model {model!r}")


def reflection_zero_freq(model: PermittivityModel, k: ArrayLike) -> ReflectionPair:
    """Analytic xi -> 0 limits of the Fresnel coefficients"""
    k = np.asarray(k, dtype=float)
    if np.any(~(k > 0.0)):
        raise DomainError("zero-frequency reflection needs k > 0")
    limit = zero_frequency_limit(model)
    ones = np.ones(k.shape)
    if limit.kind == 'perfect':
        r_e, r_m = ones, -ones
    elif limit.kind == 'conductor':
        r_e, r_m = ones, 0.0 * ones
    elif limit.kind == 'plasma':
        s = np.sqrt(k ** 2 + limit.screening)
        r_e, r_m = ones, -limit.screening / (k + s) ** 2
    else:
        r_e, r_m = (limit.epsilon - 1.0) / (limit.epsilon + 1.0) * ones, 0.0 * ones
    return ReflectionPair(_scalar_or_array(r_e), _scalar_or_array(r_m))


# --- Optical data files -------------------------------------------------------

def load_optical_table(source) -> OpticalTable:
    """Read 'energy(eV) Im_eps' records from a text stream or a path; '#' starts a comment line"""
    if hasattr(source, 'read'):
        lines = source.read().splitlines()
    else:
        with open(source, encoding='utf-8') as handle:
            lines = handle.read().splitlines()

    rows = []
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise OpticalDataError(f"expected 2 columns, found {len(parts)}: {line!r}", number)
        try:
            energy, im_eps = float(parts[0]), float(parts[1])
        except ValueError:
            raise OpticalDataError(f"cannot parse numbers in {line!r}", number)
        if not (math.isfinite(energy) and math.isfinite(im_eps)):
            raise OpticalDataError("non-finite value", number)
        if energy <= 0.0:
            raise OpticalDataError(f"photon energy must be > 0, got {energy}", number)
        if im_eps < 0.0:
            raise OpticalDataError(f"Im eps must be >= 0, got {im_eps}", number)
        rows.append((energy, im_eps, number))

    if len(rows) < 2:
        raise OpticalDataError(f"optical table needs at least 2 rows, found {len(rows)}")
    rows.sort(key=lambda row: row[0])
    for previous, current in zip(rows, rows[1:]):
        if current[0] == previous[0]:
            raise OpticalDataError(f"duplicate photon energy {current[0]}", current[2])

    logger.info(f"loaded optical table: {len(rows)} rows, {rows[0][0]:g}-{rows[-1][0]:g} eV")
    return OpticalTable(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))


def parse_material(spec: str, optical_table: Optional[OpticalTable] = None,
                   plasma_frequency: Optional[float] = None,
                   damping: Optional[float] = None) -> PermittivityModel:
    """Build a model from a spec string such as 'gold-drude', 'drude:9,0.035',
    'plasma:9', 'constant:10', 'perfect-conductor', 'vacuum' or 'tabulated'"""
    name, _, arguments = spec.strip().lower().partition(':')
    values = [float(v) for v in arguments.split(',') if v.strip()] if arguments else []
    if name == 'gold-drude':
        return gold_drude(plasma_frequency, damping)
    if name == 'perfect-conductor':
        return PerfectConductor()
    if name == 'vacuum':
        return Constant(1.0)
    if name == 'drude' and len(values) == 2:
        return Drude(*values)
    if name == 'plasma' and len(values) == 1:
        return Plasma(values[0])
    if name == 'constant' and len(values) == 1:
        return Constant(values[0])
    if name == 'tabulated':
        if optical_table is None:
            raise DomainError("tabulated material needs an optical data file")
        return Tabulated(optical_table, gold_drude(plasma_frequency, damping))
    raise DomainError(f"unrecognised material spec {spec!r}")
