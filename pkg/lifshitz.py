"""
Parallel-plate Lifshitz free energy and its distance derivatives.

F_pp(d) = k_B T sum'_n int d^2k/(2pi)^2 sum_Q ln(1 - r1_Q r2_Q e^{-2 q d})

The radial integral runs over u = 2d(q - kappa) with a composite Gauss
rule; the T = 0 frequency integral uses xi = (hbar c / 2d) t on the same rule.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Optional, Tuple, Union

import numpy as np
from scipy.special import zeta

from dielectric import PermittivityModel, reflection, reflection_zero_freq
from errors import DomainError
from numerics import SeriesResult, geometric_panel_rule, sum_until
from solver_config import HBAR_C, K_B, SERIES_CONFIG

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrequencyGrid:
    """Matsubara frequencies (temperature > 0) or the T = 0 frequency integral.

    max_terms caps the number of Matsubara terms including n = 0; None means
    the cap is derived from the separation when the grid is used.
    """
    temperature: float = 0.0
    max_terms: Optional[int] = None
    rel_tol: float = SERIES_CONFIG['rel_tol']

    def __post_init__(self):
        if not self.temperature >= 0.0:
            raise DomainError(f"temperature must be >= 0 K, got {self.temperature}")
        if not 0.0 < self.rel_tol < 1.0:
            raise DomainError("series tolerance must lie in (0, 1)")

    @classmethod
    def finite(cls, temperature: float, rel_tol: float = SERIES_CONFIG['rel_tol']) -> 'FrequencyGrid':
        if not temperature > 0.0:
            raise DomainError("finite-temperature grid needs T > 0")
        return cls(temperature, None, rel_tol)

    @classmethod
    def zero(cls) -> 'FrequencyGrid':
        return cls(0.0)

    @property
    def mode(self) -> str:
        return 'finite' if self.temperature > 0.0 else 'zero'

    @property
    def thermal_energy(self) -> float:
        """k_B T in eV"""
        return K_B * self.temperature

    @property
    def thermal_wavelength(self) -> float:
        """lambda_T = hbar c / (k_B T) in nm (inf at T = 0)"""
        return HBAR_C / self.thermal_energy if self.temperature > 0.0 else math.inf

    def matsubara(self, n) -> np.ndarray:
        """xi_n = 2 pi n k_B T (eV)"""
        return 2.0 * math.pi * np.asarray(n, dtype=float) * self.thermal_energy

    def matsubara_weights(self, n) -> np.ndarray:
        n = np.asarray(n)
        return np.where(n == 0, 0.5, 1.0)

    def term_cap(self, d: float) -> int:
        """Number of Matsubara terms (n = 0 included) allowed at separation d"""
        if self.max_terms is not None:
            return self.max_terms
        envelope = SERIES_CONFIG['envelope_factor'] * self.thermal_wavelength / (4.0 * math.pi * d)
        return max(int(math.ceil(envelope)), SERIES_CONFIG['min_terms']) + 1

    def zero_temperature_rule(self, d: float) -> Tuple[np.ndarray, np.ndarray]:
        """Frequency nodes and weights replacing k_B T sum' by int d xi / (2 pi)"""
        t, w = geometric_panel_rule()
        scale = HBAR_C / (2.0 * d)
        return scale * t, scale * w / (2.0 * math.pi)


def build_grid(temperature: Union[float, str], d: float,
               tol: float = SERIES_CONFIG['rel_tol']) -> FrequencyGrid:
    """Grid for a temperature in kelvin (or 'zero') at separation d"""
    _check_separation(d)
    if temperature == 'zero' or temperature == 0:
        return FrequencyGrid(0.0, None, tol)
    temperature = float(temperature)
    if temperature < 0.0:
        raise DomainError(f"temperature must be >= 0 K, got {temperature}")
    grid = FrequencyGrid(temperature, None, tol)
    return FrequencyGrid(temperature, grid.term_cap(d), tol)


@dataclass(frozen=True)
class PlatePair:
    """Material 1 is the curved (or upper) plate, material 2 the flat one"""
    material1: PermittivityModel
    material2: PermittivityModel
    grid: FrequencyGrid


def _check_separation(d: float):
    if not d > 0.0:
        raise DomainError(f"separation must be > 0 nm, got {d}")


def frequency_sum(grid: FrequencyGrid, d: float,
                  zero_term: Callable[[], np.ndarray],
                  term: Callable[[np.ndarray], np.ndarray],
                  elements_per_frequency: int,
                  fixed_terms: Optional[int] = None) -> SeriesResult:
    """Reduce per-frequency values with the grid's measure.

    term(xi) maps a block of frequencies (shape (n,)) onto values of shape
    (n, ...). Finite temperature: n = 0 comes from zero_term with weight 1/2,
    then blocks of Matsubara terms until sum_until stops, or exactly
    fixed_terms terms when given. T = 0: weighted quadrature over all nodes.
    """
    block = max(1, SERIES_CONFIG['chunk_elements'] // max(1, elements_per_frequency))

    if grid.mode == 'zero':
        xi, weights = grid.zero_temperature_rule(d)
        total = None
        for start in range(0, len(xi), block):
            values = term(xi[start:start + block])
            partial = np.tensordot(weights[start:start + block], values, axes=1)
            total = partial if total is None else total + partial
        return SeriesResult(total, len(xi), True)

    thermal = grid.thermal_energy

    def terms() -> Iterator[np.ndarray]:
        yield 0.5 * thermal * np.asarray(zero_term())
        for start in itertools.count(1, block):
            n = np.arange(start, start + block)
            for value in term(grid.matsubara(n)):
                yield thermal * value

    if fixed_terms is not None:
        total = sum(itertools.islice(terms(), fixed_terms))
        return SeriesResult(total, fixed_terms, True)
    result = sum_until(terms(), grid.rel_tol, max_terms=grid.term_cap(d))
    if not result.converged:
        logger.warning(f"Matsubara sum at d={d} nm hit the cap of {result.terms_used} terms")
    return result


def radial_nodes(kappa: np.ndarray, d: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """q, k, u = 2qd and the measure of int d^2k/(2pi)^2 on the u rule.

    kappa has shape (n, 1); outputs broadcast to (n, nodes).
    """
    v, w = geometric_panel_rule()
    half = v / (2.0 * d)
    q = kappa + half
    k = np.sqrt(half * (2.0 * kappa + half))
    u = 2.0 * kappa * d + v
    measure = (w / (2.0 * d)) * q / (2.0 * math.pi)
    return q, k, u, measure


def round_trip(r1: np.ndarray, r2: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """rr = r1 r2 and e^u - rr, stable when rr -> 1 and u -> 0"""
    rr = r1 * r2
    with np.errstate(over='ignore'):
        return rr, np.expm1(u) + (1.0 - rr)


def _plate_integrands(q, u, measure, reflections) -> np.ndarray:
    """Integrated ln, d/dd and d^2/dd^2 of the Lifshitz integrand per frequency"""
    out = np.zeros(q.shape[:-1] + (3,))
    for r1, r2 in reflections:
        rr, den = round_trip(r1, r2, u)
        with np.errstate(over='ignore', divide='ignore', invalid='ignore'):
            small_u = np.log(den) - u
            large_u = np.log1p(-rr * np.exp(-u))
            log_term = np.where(u <= 1.0, small_u, large_u)
            ratio = rr / den
        log_term = np.where(rr == 0.0, 0.0, log_term)
        out[..., 0] += np.sum(measure * log_term, axis=-1)
        out[..., 1] += np.sum(measure * 2.0 * q * ratio, axis=-1)
        out[..., 2] += np.sum(measure * (-4.0) * q * q * ratio * (1.0 + ratio), axis=-1)
    return out


@dataclass(frozen=True)
class PlateQuantities:
    free_energy: float  # eV/nm^2
    first_derivative: float  # eV/nm^3
    second_derivative: float  # eV/nm^4
    terms_used: int
    converged: bool

    @property
    def force(self) -> float:
        return -self.first_derivative


@lru_cache(maxsize=512)
def plate_quantities(pair: PlatePair, d: float, fixed_terms: Optional[int] = None) -> PlateQuantities:
    """F_pp, F'_pp and F''_pp from one pass over frequencies and momenta.

    fixed_terms pins the Matsubara truncation, so that another sum over the
    same frequencies can be compared term for term.
    """
    _check_separation(d)
    grid = pair.grid
    nodes = len(geometric_panel_rule()[0])

    def zero_term() -> np.ndarray:
        q, k, u, measure = radial_nodes(np.zeros((1, 1)), d)
        r1 = reflection_zero_freq(pair.material1, k)
        r2 = reflection_zero_freq(pair.material2, k)
        return _plate_integrands(q, u, measure, zip(r1, r2))[0]

    def term(xi: np.ndarray) -> np.ndarray:
        xi = xi[:, None]
        q, k, u, measure = radial_nodes(xi / HBAR_C, d)
        r1 = reflection(pair.material1, xi, k)
        r2 = reflection(pair.material2, xi, k)
        return _plate_integrands(q, u, measure, zip(r1, r2))

    result = frequency_sum(grid, d, zero_term, term, nodes, fixed_terms=fixed_terms)
    value = np.asarray(result.value, dtype=float)
    return PlateQuantities(float(value[0]), float(value[1]), float(value[2]),
                           result.terms_used, result.converged)


@dataclass(frozen=True)
class PlateResult:
    value: float
    terms_used: int
    converged: bool

    def __float__(self):
        return float(self.value)


def free_energy_pp(pair: PlatePair, d: float) -> PlateResult:
    """Free energy per unit area (eV/nm^2)"""
    quantities = plate_quantities(pair, d)
    return PlateResult(quantities.free_energy, quantities.terms_used, quantities.converged)


def force_pp(pair: PlatePair, d: float) -> PlateResult:
    """F_pp = -dF_pp/dd (eV/nm^3), differentiated under the integral"""
    quantities = plate_quantities(pair, d)
    return PlateResult(quantities.force, quantities.terms_used, quantities.converged)


def d2_free_energy_pp(pair: PlatePair, d: float) -> PlateResult:
    """F''_pp (eV/nm^4), differentiated under the integral"""
    quantities = plate_quantities(pair, d)
    return PlateResult(quantities.second_derivative, quantities.terms_used, quantities.converged)


def perfect_conductor_free_energy(d: float) -> float:
    """-pi^2 hbar c / (720 d^3)"""
    return -math.pi ** 2 * HBAR_C / (720.0 * d ** 3)


def classical_dirichlet_free_energy(temperature: float, d: float) -> float:
    """High-temperature limit of a TM-only (r_E = 1) n = 0 term: -k_B T zeta(3) / (16 pi d^2)"""
    return -K_B * temperature * zeta(3.0) / (16.0 * math.pi * d ** 2)
