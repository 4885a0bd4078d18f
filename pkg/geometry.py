"""
Profiles, the PFA and gradient-expansion functionals, and the d/R
correction theta1 to the PFA force gradient of an axisymmetric body.

F[H] = int dx [F_pp(H) + delta(H) grad H . grad H]

Axisymmetric profiles are written in w = rho^2:
H(w) = d + w/(2R) + c1 w^2/(2R^3) + c2 w^3/(2R^5) + ...
so |grad H|^2 = 4 w H'(w)^2 and dx = pi dw.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from dielectric import Constant, PerfectConductor
from errors import DomainError
from kernel import KernelProvider, gradient_coefficients
from lifshitz import PlatePair, free_energy_pp, plate_quantities
from numerics import QuadratureSpec, integrate
from solver_config import DIFF_CONFIG, GEOMETRY_CONFIG

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AxisymmetricProfile:
    """Closest separation d (nm), curvature radius R (nm) and the even expansion coefficients.

    Only c1 enters theta1 at first order in d/R; `higher` (c2, c3, ...) is
    used by the functionals.
    """
    d: float
    radius: float
    c1: float = 0.0
    higher: Tuple[float, ...] = ()

    def __post_init__(self):
        if not self.d > 0.0:
            raise DomainError(f"separation must be > 0 nm, got {self.d}")
        if not self.radius > 0.0:
            raise DomainError(f"radius must be > 0 nm, got {self.radius}")

    @property
    def coefficients(self) -> Tuple[float, ...]:
        """(c0 = 1, c1, c2, ...) of H = d + sum_j c_j w^{j+1} / (2 R^{2j+1})"""
        return (1.0, self.c1) + tuple(self.higher)

    def height(self, w):
        w = np.asarray(w, dtype=float)
        total = np.full(w.shape, self.d)
        for j, c in enumerate(self.coefficients):
            total = total + c * w ** (j + 1) / (2.0 * self.radius ** (2 * j + 1))
        return total

    def slope(self, w):
        """dH/dw"""
        w = np.asarray(w, dtype=float)
        total = np.zeros(w.shape)
        for j, c in enumerate(self.coefficients):
            total = total + (j + 1) * c * w ** j / (2.0 * self.radius ** (2 * j + 1))
        return total

    def gradient_squared(self, w):
        return 4.0 * np.asarray(w, dtype=float) * self.slope(w) ** 2

    def with_separation(self, d: float) -> 'AxisymmetricProfile':
        return AxisymmetricProfile(d, self.radius, self.c1, self.higher)


def sphere(d: float, radius: float) -> AxisymmetricProfile:
    """Series of R - sqrt(R^2 - rho^2) up to rho^8"""
    return AxisymmetricProfile(d, radius, 0.25, (0.125, 5.0 / 64.0))


def paraboloid(d: float, radius: float) -> AxisymmetricProfile:
    return AxisymmetricProfile(d, radius, 0.0)


@dataclass(frozen=True)
class HeightField:
    """H(x, y) over a box, optionally masked, integrated on a product trapezoid mesh"""
    height: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    bounds: Tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    mask: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    points: Tuple[int, int] = (201, 201)

    def heights(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        x, y, xx, yy, inside = self.grid()
        h = np.asarray(self.height(xx, yy), dtype=float) * np.ones(xx.shape)
        if np.any(h[inside] <= 0.0):
            raise DomainError("height field touches or crosses the plate")
        return x, y, h, inside

    def grid(self):
        x_min, x_max, y_min, y_max = self.bounds
        if not (x_max > x_min and y_max > y_min):
            raise DomainError(f"empty integration box {self.bounds}")
        x = np.linspace(x_min, x_max, self.points[0])
        y = np.linspace(y_min, y_max, self.points[1])
        xx, yy = np.meshgrid(x, y, indexing='ij')
        inside = np.ones(xx.shape, dtype=bool) if self.mask is None else np.asarray(self.mask(xx, yy), dtype=bool)
        return x, y, xx, yy, inside


def flat_field(d: float, width: float, length: float) -> HeightField:
    return HeightField(lambda x, y: np.full(np.shape(x), d),
                       lambda x, y: (np.zeros(np.shape(x)), np.zeros(np.shape(x))),
                       (0.0, width, 0.0, length), points=(5, 5))


def flat_disc(d: float, disc_radius: float, points: int = 201) -> HeightField:
    return HeightField(lambda x, y: np.full(np.shape(x), d),
                       lambda x, y: (np.zeros(np.shape(x)), np.zeros(np.shape(x))),
                       (-disc_radius, disc_radius, -disc_radius, disc_radius),
                       mask=lambda x, y: x * x + y * y <= disc_radius ** 2,
                       points=(points, points))


def sphere_cap(d: float, radius: float, half_width: float, points: int = 201) -> HeightField:
    """Exact spherical cap over a square box clipped to the sphere's footprint"""
    if not 0.0 < half_width <= radius:
        raise DomainError("half_width must lie in (0, R]")

    def height(x, y):
        rho2 = np.minimum(x * x + y * y, radius * radius)
        return d + radius - np.sqrt(radius * radius - rho2)

    def gradient(x, y):
        root = np.sqrt(np.maximum(radius * radius - x * x - y * y, 1e-300))
        return x / root, y / root

    return HeightField(height, gradient, (-half_width, half_width, -half_width, half_width),
                       mask=lambda x, y: x * x + y * y < (0.999 * radius) ** 2, points=(points, points))


# --- coefficient table ----------------------------------------------------------

def _scale_free(pair: PlatePair) -> bool:
    """T = 0 pairs without a material length scale: F_pp and delta both go as H^-3"""
    plain = (PerfectConductor, Constant)
    return pair.grid.mode == 'zero' and isinstance(pair.material1, plain) and isinstance(pair.material2, plain)


def _interpolant(nodes: np.ndarray, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Monotone cubic in log-log when the values keep one sign, in log H otherwise"""
    log_h = np.log(nodes)
    if len(nodes) == 1:
        return lambda h: np.full(np.shape(h), values[0])
    if np.all(values > 0.0) or np.all(values < 0.0):
        sign = float(np.sign(values[0]))
        spline = PchipInterpolator(log_h, np.log(np.abs(values)), extrapolate=True)
        return lambda h: sign * np.exp(spline(np.log(h)))
    spline = PchipInterpolator(log_h, values, extrapolate=True)
    return lambda h: spline(np.log(h))


class CoefficientTable:
    """F_pp(H) and delta(H) on a log grid in H with monotone cubic interpolation.

    Geometric midpoints between a few node pairs are evaluated directly.
    interpolation_error is the largest deviation there, per quantity,
    divided by the largest magnitude of that quantity on the nodes, so a
    coefficient passing through zero does not inflate it.
    """

    def __init__(self, pair: PlatePair, provider: KernelProvider, h_min: float, h_max: float,
                 nodes: int = GEOMETRY_CONFIG['coefficient_nodes'],
                 checks: int = GEOMETRY_CONFIG['check_points'],
                 levels: int = DIFF_CONFIG['kernel_levels']):
        if not 0.0 < h_min <= h_max:
            raise DomainError(f"invalid height range [{h_min}, {h_max}]")
        self.pair = pair
        self.provider = provider
        self.levels = levels
        self.h_min, self.h_max = h_min, h_max
        self.converged = True
        self.interpolation_error = 0.0

        if _scale_free(pair) or h_max <= h_min * (1.0 + 1e-12):
            free, delta = self._direct(h_min)
            if _scale_free(pair):
                self._free = lambda h: free * (h_min / np.asarray(h)) ** 3
                self._delta = lambda h: delta * (h_min / np.asarray(h)) ** 3
            else:
                self._free = lambda h: np.full(np.shape(h), free)
                self._delta = lambda h: np.full(np.shape(h), delta)
            self.nodes = np.array([h_min])
            return

        self.nodes = np.geomspace(h_min, h_max, max(nodes, 2))
        samples = [self._direct(h) for h in self.nodes]
        free = np.array([s[0] for s in samples])
        delta = np.array([s[1] for s in samples])
        self.free_values, self.delta_values = free, delta
        self._free = _interpolant(self.nodes, free)
        self._delta = _interpolant(self.nodes, delta)
        self.interpolation_error = self._midpoint_error(checks)
        logger.info(f"coefficient table on [{h_min:.4g}, {h_max:.4g}] nm: {len(self.nodes)} nodes, "
                    f"interpolation error {self.interpolation_error:.2e}")

    def _direct(self, h: float) -> Tuple[float, float]:
        result = free_energy_pp(self.pair, float(h))
        coefficients = gradient_coefficients(self.provider, self.pair, float(h), levels=self.levels)
        self.converged = self.converged and result.converged and coefficients.converged
        return result.value, coefficients.delta

    def _midpoint_error(self, checks: int) -> float:
        if checks < 1 or len(self.nodes) < 2:
            return 0.0
        picks = np.unique(np.linspace(0, len(self.nodes) - 2, checks).round().astype(int))
        scales = (np.max(np.abs(self.free_values)), np.max(np.abs(self.delta_values)))
        worst = 0.0
        for j in picks:
            h = math.sqrt(self.nodes[j] * self.nodes[j + 1])
            free, delta = self._direct(h)
            pairs = ((free, self.free_energy(h)), (delta, self.delta(h)))
            for scale, (direct, interpolated) in zip(scales, pairs):
                if scale > 0.0:
                    worst = max(worst, float(abs(interpolated - direct)) / scale)
        return worst

    def free_energy(self, h):
        return self._free(np.asarray(h, dtype=float))

    def delta(self, h):
        return self._delta(np.asarray(h, dtype=float))

    def tail_exponent(self, which: str, count: int = 4) -> Optional[Tuple[float, float]]:
        """(A, p) of a power law A H^-p fitted to the last nodes; None when not single-signed"""
        if len(self.nodes) == 1:
            if _scale_free(self.pair):
                value = self.free_energy(self.h_min) if which == 'free' else self.delta(self.h_min)
                return float(value * self.h_min ** 3), 3.0
            return None
        values = self.free_values if which == 'free' else self.delta_values
        h, v = self.nodes[-count:], values[-count:]
        if np.all(v == 0.0):
            return 0.0, 0.0
        if not (np.all(v > 0.0) or np.all(v < 0.0)):
            return None
        slope, intercept = np.polyfit(np.log(h), np.log(np.abs(v)), 1)
        return float(np.sign(v[-1]) * math.exp(intercept)), float(-slope)


# --- functionals -------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalResult:
    value: float  # eV
    tail: float
    error: float
    converged: bool
    flags: Tuple[str, ...] = ()

    def __float__(self):
        return float(self.value)


def cutoff_height(profile: AxisymmetricProfile) -> float:
    return profile.d + GEOMETRY_CONFIG['cutoff_factor'] * min(profile.d, profile.radius)


def _cutoff_w(profile: AxisymmetricProfile, h_cut: float) -> float:
    upper = 2.0 * profile.radius * (h_cut - profile.d)
    while profile.height(upper) < h_cut:
        upper *= 2.0
    return brentq(lambda w: float(profile.height(w)) - h_cut, 0.0, upper, xtol=1e-14 * upper)


def coefficient_table(pair: PlatePair, provider: KernelProvider,
                      profile: Union[AxisymmetricProfile, HeightField], **kwargs) -> CoefficientTable:
    if isinstance(profile, AxisymmetricProfile):
        return CoefficientTable(pair, provider, profile.d, cutoff_height(profile), **kwargs)
    _, _, h, inside = profile.heights()
    return CoefficientTable(pair, provider, float(h[inside].min()), float(h[inside].max()), **kwargs)


def _axisymmetric_functional(profile: AxisymmetricProfile, density: Callable, table: CoefficientTable,
                             tail_law: Optional[Tuple[float, float]], min_exponent: float,
                             weight: Callable, spec: Optional[QuadratureSpec]) -> FunctionalResult:
    h_cut = cutoff_height(profile)
    w_cut = _cutoff_w(profile, h_cut)
    spec = spec or QuadratureSpec(rel_tol=1e-9)
    body = integrate(lambda w: math.pi * float(density(profile.height(w)) * weight(w)), 0.0, w_cut, spec)

    flags: List[str] = []
    if not body.converged:
        flags.append('quadrature')
    if not table.converged:
        flags.append('coefficients')

    tail = 0.0
    if tail_law is None:
        flags.append('tail')
    else:
        amplitude, exponent = tail_law
        if amplitude != 0.0 and exponent <= min_exponent:
            flags.append('tail')
        elif amplitude != 0.0:
            # w = w_cut e^s turns the algebraic tail into an exponential one
            def tail_integrand(s: float) -> float:
                w = w_cut * math.exp(s)
                return math.pi * amplitude * float(profile.height(w)) ** -exponent * float(weight(w)) * w

            decay = 1.0 / (exponent - min_exponent + 0.05)
            tail = integrate(tail_integrand, 0.0, math.inf, QuadratureSpec(rel_tol=1e-8, decay_scale=decay)).value
    value = body.value + tail
    error = body.error + abs(value) * table.interpolation_error + 0.1 * abs(tail)
    return FunctionalResult(value, tail, error, not flags, tuple(flags))


def _field_functional(profile: HeightField, integrand: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
                      table: CoefficientTable) -> FunctionalResult:
    x, y, xx, yy, inside = profile.grid()
    h = np.asarray(profile.height(xx, yy), dtype=float) * np.ones(xx.shape)
    if np.any(h[inside] <= 0.0):
        raise DomainError("height field touches or crosses the plate")
    values = np.where(inside, integrand(np.where(inside, h, table.h_min), xx, yy), 0.0)
    value = float(trapezoid(trapezoid(values, y, axis=1), x))
    flags = () if table.converged else ('coefficients',)
    return FunctionalResult(value, 0.0, abs(value) * table.interpolation_error, not flags, flags)


def pfa_free_energy(pair: PlatePair, profile: Union[AxisymmetricProfile, HeightField],
                    table: Optional[CoefficientTable] = None,
                    spec: Optional[QuadratureSpec] = None) -> FunctionalResult:
    """int dx F_pp(H(x)) in eV"""
    if table is None:
        table = _free_energy_table(pair, profile)
    if isinstance(profile, HeightField):
        return _field_functional(profile, lambda h, x, y: table.free_energy(h), table)
    return _axisymmetric_functional(profile, table.free_energy, table, table.tail_exponent('free'),
                                    1.0 + 0.05, lambda w: 1.0, spec)


def gradient_correction(pair: PlatePair, provider: KernelProvider,
                        profile: Union[AxisymmetricProfile, HeightField],
                        table: Optional[CoefficientTable] = None,
                        spec: Optional[QuadratureSpec] = None) -> FunctionalResult:
    """int dx delta(H) |grad H|^2 in eV"""
    table = table or coefficient_table(pair, provider, profile)
    if isinstance(profile, HeightField):
        def integrand(h, x, y):
            gx, gy = profile.gradient(x, y)
            return table.delta(h) * (np.asarray(gx) ** 2 + np.asarray(gy) ** 2)

        return _field_functional(profile, integrand, table)
    return _axisymmetric_functional(profile, table.delta, table, table.tail_exponent('delta'),
                                    GEOMETRY_CONFIG['tail_min_exponent'], profile.gradient_squared, spec)


class _FreeEnergyTable(CoefficientTable):
    """Table of F_pp alone (no kernel evaluations)"""

    def _direct(self, h: float) -> Tuple[float, float]:
        result = free_energy_pp(self.pair, float(h))
        self.converged = self.converged and result.converged
        return result.value, 0.0


def _free_energy_table(pair: PlatePair, profile) -> CoefficientTable:
    if isinstance(profile, AxisymmetricProfile):
        return _FreeEnergyTable(pair, None, profile.d, cutoff_height(profile))
    _, _, h, inside = profile.heights()
    return _FreeEnergyTable(pair, None, float(h[inside].min()), float(h[inside].max()))


# --- theta1 ---------------------------------------------------------------------

@dataclass(frozen=True)
class Theta1Result:
    d: float
    beta: float
    theta1: float
    free_energy: float  # F_pp, eV/nm^2
    force: float  # F_pp, eV/nm^3
    c1: float
    error: float
    converged: bool
    diagnostics: Dict = field(default_factory=dict)


def theta1(pair: PlatePair, provider: KernelProvider, d: float, c1: float = 0.25,
           levels: int = DIFF_CONFIG['kernel_levels']) -> Theta1Result:
    """theta1 = F_pp / (d F_pp) (2 beta - 4 c1) with beta = delta / F_pp"""
    if not d > 0.0:
        raise DomainError(f"separation must be > 0 nm, got {d}")
    plates = plate_quantities(pair, d)
    if plates.free_energy == 0.0 or plates.force == 0.0:
        raise DomainError("theta1 is undefined for non-interacting plates")
    coefficients = gradient_coefficients(provider, pair, d, levels=levels)
    beta = coefficients.delta / plates.free_energy
    prefactor = plates.free_energy / (d * plates.force)
    value = prefactor * (2.0 * beta - 4.0 * c1)
    error = 2.0 * coefficients.delta_error / abs(d * plates.force)
    diagnostics = dict(coefficients.diagnostics)
    diagnostics['gamma'] = coefficients.gamma
    diagnostics['delta'] = coefficients.delta
    diagnostics['plate_terms'] = plates.terms_used
    converged = plates.converged and coefficients.converged
    return Theta1Result(d, beta, value, plates.free_energy, plates.force, c1, error, converged, diagnostics)


def force_gradient(pair: PlatePair, provider: KernelProvider, d: float, radius: float, c1: float = 0.25,
                   theta: Optional[Theta1Result] = None) -> float:
    """dF/dd = -2 pi R F_pp(d) (1 + theta1 d/R), eV/nm^2"""
    if not radius > 0.0:
        raise DomainError(f"radius must be > 0 nm, got {radius}")
    if d / radius > GEOMETRY_CONFIG['expansion_warning_ratio']:
        logger.warning(f"d/R = {d / radius:.3g} is beyond the range where the first-order expansion holds")
    theta = theta or theta1(pair, provider, d, c1)
    return -2.0 * math.pi * radius * theta.force * (1.0 + theta.theta1 * d / radius)


@dataclass(frozen=True)
class SmallDistanceLimit:
    value: float
    error: float
    samples: Tuple[Tuple[float, float], ...]
    converged: bool


def _lagrange_at_zero(xs: Sequence[float]) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    weights = np.ones(len(xs))
    for i, x in enumerate(xs):
        for j, other in enumerate(xs):
            if i != j:
                weights[i] *= other / (other - x)
    return weights


def theta1_small_d_limit(pair: PlatePair, provider: KernelProvider,
                         separations: Sequence[float] = GEOMETRY_CONFIG['small_d_separations'],
                         c1: float = 0.25) -> SmallDistanceLimit:
    """Polynomial extrapolation of theta1(d) to d -> 0; error from the next lower order"""
    separations = sorted(float(d) for d in separations)
    if len(separations) < 2:
        raise DomainError("need at least two separations to extrapolate")
    results = [theta1(pair, provider, d, c1) for d in separations]
    values = np.array([r.theta1 for r in results])
    value = float(_lagrange_at_zero(separations) @ values)
    lower = float(_lagrange_at_zero(separations[:-1]) @ values[:-1])
    samples = tuple((d, float(v)) for d, v in zip(separations, values))
    return SmallDistanceLimit(value, abs(value - lower), samples, all(r.converged for r in results))
