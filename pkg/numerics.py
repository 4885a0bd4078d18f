"""
Numerical primitives: adaptive quadrature, Richardson-extrapolated second
differences, convergent-series summation and fixed Gauss rules.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from errors import DomainError, IntegrandError
from solver_config import DIFF_CONFIG, QUADRATURE_CONFIG, SERIES_CONFIG

logger = logging.getLogger(__name__)

Number = Union[float, np.ndarray]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for scalar adaptive quadrature"""
    rel_tol: float = QUADRATURE_CONFIG['rel_tol']
    abs_tol: float = QUADRATURE_CONFIG['abs_tol']
    max_subdivisions: int = QUADRATURE_CONFIG['max_subdivisions']
    decay_scale: float = QUADRATURE_CONFIG['decay_scale']

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise DomainError(f"relative tolerance must lie in (0, 1), got {self.rel_tol}")
        if self.abs_tol < 0.0:
            raise DomainError(f"absolute tolerance must be >= 0, got {self.abs_tol}")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if self.decay_scale <= 0.0:
            raise DomainError("decay_scale must be > 0")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    converged: bool
    evaluations: int = 0

    def __float__(self):
        return float(self.value)


def integrate(f: Callable[[float], float], a: float, b: float,
              spec: Optional[QuadratureSpec] = None) -> QuadratureResult:
    """Integrate f over [a, b]; b may be +inf.

    Finite intervals go straight to adaptive Gauss-Kronrod (QUADPACK via
    scipy). A semi-infinite range is mapped onto [0, 1) with
    x = a - L ln(1 - u), which turns an e^{-x/L} decay into a bounded
    integrand.
    """
    spec = spec or QuadratureSpec()
    if math.isnan(a) or math.isnan(b) or math.isinf(a) or b < a:
        raise DomainError(f"invalid integration range [{a}, {b}]")
    if a == b:
        return QuadratureResult(0.0, 0.0, True, 0)

    def checked(x: float) -> float:
        value = f(x)
        if math.isnan(value):
            raise IntegrandError(x)
        return value

    if math.isinf(b):
        scale = spec.decay_scale

        def target(u: float) -> float:
            one_minus_u = 1.0 - u
            return checked(a - scale * math.log(one_minus_u)) * scale / one_minus_u

        lower, upper = 0.0, 1.0
    else:
        target = checked
        lower, upper = a, b

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', IntegrationWarning)
        result = quad(target, lower, upper, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                      limit=spec.max_subdivisions, full_output=1)

    value, error, info = result[0], result[1], result[2]
    clean_exit = len(result) == 3
    converged = clean_exit and error <= max(spec.rel_tol * abs(value), spec.abs_tol)
    if not converged:
        logger.debug(f"quadrature on [{a}, {b}] not converged: value={value:.6e} error={error:.2e}")
    return QuadratureResult(value, error, converged, info.get('neval', 0))


@dataclass(frozen=True)
class DiffSpec:
    """Base step and number of Richardson levels (the step halves per level)"""
    step: float = DIFF_CONFIG['step']
    levels: int = DIFF_CONFIG['levels']

    def __post_init__(self):
        if self.step <= 0.0:
            raise DomainError(f"step must be > 0, got {self.step}")
        if self.levels < 1:
            raise DomainError(f"levels must be >= 1, got {self.levels}")

    def steps(self) -> Tuple[float, ...]:
        return tuple(self.step / 2.0 ** j for j in range(self.levels + 1))


@dataclass(frozen=True)
class DerivativeResult:
    value: float
    error: float
    converged: bool
    monotone: bool
    steps: Tuple[float, ...] = ()

    def __float__(self):
        return float(self.value)


def richardson_second_difference(f0: float, f_plus: Sequence[float], f_minus: Sequence[float],
                                 steps: Sequence[float],
                                 orders: Optional[Sequence[int]] = None) -> DerivativeResult:
    """Extrapolate symmetric second differences taken at halving steps.

    Level m removes the h^orders[m-1] term. The default (2, 4, 6, ...) fits
    smooth functions; a function with a |x|^3 term has a quotient error in
    every power of h and needs orders (1, 2, 3, ...). The error estimate is
    the change between the last two diagonal entries of the tableau.
    """
    if not (len(f_plus) == len(f_minus) == len(steps)) or len(steps) < 2:
        raise DomainError("need matching samples at two or more steps")

    orders = tuple(orders) if orders is not None else tuple(2 * m for m in range(1, len(steps)))
    if len(orders) < len(steps) - 1:
        raise DomainError(f"need {len(steps) - 1} error orders, got {len(orders)}")

    table = [[(p - 2.0 * f0 + m) / h ** 2] for p, m, h in zip(f_plus, f_minus, steps)]
    for j in range(1, len(steps)):
        ratio = steps[j - 1] / steps[j]
        for m in range(1, j + 1):
            factor = ratio ** orders[m - 1]
            previous = table[j][m - 1]
            table[j].append(previous + (previous - table[j - 1][m - 1]) / (factor - 1.0))

    diagonal = [table[j][j] for j in range(len(steps))]
    changes = [abs(diagonal[j] - diagonal[j - 1]) for j in range(1, len(diagonal))]
    floor = 64.0 * np.finfo(float).eps * max(abs(v) for row in table for v in row)
    monotone = all(later <= earlier or later <= floor
                   for earlier, later in zip(changes, changes[1:]))
    value = diagonal[-1]
    error = changes[-1]
    converged = monotone and math.isfinite(value) and math.isfinite(error)
    return DerivativeResult(value, error, converged, monotone, tuple(steps))


def second_derivative_at(f: Callable[[float], float], x0: float,
                         spec: Optional[DiffSpec] = None) -> DerivativeResult:
    """f''(x0) by Richardson extrapolation of symmetric second differences"""
    spec = spec or DiffSpec()
    steps = spec.steps()
    f0 = f(x0)
    f_plus = [f(x0 + h) for h in steps]
    f_minus = [f(x0 - h) for h in steps]
    result = richardson_second_difference(f0, f_plus, f_minus, steps)
    if not result.monotone:
        logger.debug(f"non-monotone Richardson sequence at x0={x0}")
    return result


@dataclass(frozen=True)
class SeriesResult:
    value: Number
    terms_used: int
    converged: bool


def _magnitude(value) -> float:
    return float(np.max(np.abs(value)))


def sum_until(terms: Iterable[Number], rel_tol: float = SERIES_CONFIG['rel_tol'],
              consecutive: int = SERIES_CONFIG['consecutive_small_terms'],
              max_terms: Optional[int] = None) -> SeriesResult:
    """Sum terms until `consecutive` successive terms are each below
    rel_tol times the partial sum (max-norm for array-valued terms) and the
    remainder, bounded as a geometric series with the ratio of the last two
    term magnitudes, is below rel_tol times the partial sum as well.

    Running into max_terms returns the partial sum flagged as not converged;
    a finite iterable that runs out is a complete sum.
    """
    if consecutive < 1:
        raise DomainError("consecutive must be >= 1")
    total = None
    small = 0
    used = 0
    last = None
    for term in terms:
        total = term if total is None else total + term
        used += 1
        size = _magnitude(term)
        bound = rel_tol * _magnitude(total)
        if size <= bound:
            small += 1
        else:
            small = 0
        if small >= consecutive and _remainder(size, last) <= bound:
            return SeriesResult(total, used, True)
        last = size
        if max_terms is not None and used >= max_terms:
            logger.debug(f"series hit the cap of {max_terms} terms")
            return SeriesResult(total, used, False)
    return SeriesResult(0.0 if total is None else total, used, True)


def _remainder(size: float, previous: Optional[float]) -> float:
    """size * r / (1 - r) with r = size / previous; infinite unless the terms shrink"""
    if size == 0.0:
        return 0.0
    if not previous or size >= previous:
        return math.inf
    ratio = size / previous
    return size * ratio / (1.0 - ratio)


@lru_cache(maxsize=None)
def gauss_legendre(order: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]"""
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    weights = half * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _composite(edges: Sequence[float], order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def geometric_panel_rule(order: int = QUADRATURE_CONFIG['panel_order'],
                         ratio: float = QUADRATURE_CONFIG['panel_ratio'],
                         first_edge: float = QUADRATURE_CONFIG['panel_first_edge'],
                         last_edge: float = QUADRATURE_CONFIG['panel_last_edge']) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule for integrands decaying like e^{-u} on [0, inf).

    Panels grow geometrically from first_edge to last_edge; the range beyond
    last_edge is dropped.
    """
    if ratio <= 1.0 or not 0.0 < first_edge < last_edge:
        raise DomainError("invalid panel layout")
    edges = [0.0]
    edge = first_edge
    while edge <= last_edge * (1.0 + 1e-12):
        edges.append(edge)
        edge *= ratio
    if edges[-1] < last_edge:
        edges.append(last_edge)
    return _composite(edges, order)


@lru_cache(maxsize=None)
def uniform_panel_rule(upper: float, width: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, upper] with panels no wider than width"""
    panels = max(1, int(math.ceil(upper / width)))
    return _composite(np.linspace(0.0, upper, panels + 1), order)
