"""
Second-order kernel of the gradient expansion.

G(k; d) = k_B T sum'_n int d^2k'/(2pi)^2 [f_n(k', k'+k) + f_n(k', k'-k)] / 2

f_n(k', k'') = -sum_Q N_Q(k') [B2_QQ(k', k'; k'')
               + 2 sum_Q' N_Q'(k'') B_QQ'(k', k'') B_Q'Q(k'', k')]

with N_Q(k) = q r2_Q e^{-2qd} / g_Q(k). B and B2 are the first- and
second-order scattering amplitudes of the deformed plate (material 1) in
the basis E_t (TE, "M") and H_t (TM, "E"); B(k, k') scatters k' into k.

G(0) is evaluated in polar form. For k > 0 the k' plane is covered by
elliptic coordinates whose foci sit at k' = 0 and k' = -k, where the
zero-frequency integrand has conical points.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from dielectric import (PerfectConductor, PermittivityModel, permittivity, reflection,
                        reflection_zero_freq, zero_frequency_limit)
from errors import ConvergenceError, DomainError
from lifshitz import PlatePair, frequency_sum, plate_quantities, radial_nodes, round_trip
from numerics import DerivativeResult, gauss_legendre, richardson_second_difference, uniform_panel_rule
from solver_config import ANGULAR_CONFIG, DIFF_CONFIG, HBAR_C, QUADRATURE_CONFIG, SERIES_CONFIG

logger = logging.getLogger(__name__)

GAMMA_CHECK_TOL = 1e-5


@dataclass(frozen=True)
class MaterialResponse:
    """Curved-plate response at one or more imaginary frequencies.

    kind is 'finite' (xi > 0), or the zero-frequency kind of the material:
    'perfect', 'conductor', 'plasma', 'dielectric'.
    """
    kind: str
    kappa: np.ndarray
    eps: np.ndarray
    eps_kappa2: np.ndarray


class ScatteringBlock(NamedTuple):
    ee: np.ndarray
    em: np.ndarray  # out E, in M
    me: np.ndarray  # out M, in E
    mm: np.ndarray

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.ee, self.em], [self.me, self.mm]], dtype=float)


class KernelProvider(ABC):
    """First- and second-order scattering amplitudes of the curved plate.

    first_order(resp, k1, k2, cos, sin) returns B(k1 <- k2) for the angle
    between in-plane momenta (cos = k1.k2, sin = z.(k1 x k2), unit vectors).
    second_order(resp, k1, k2, cos, sin2) returns the diagonal B2(k1, k1; k2)
    for the intermediate momentum k2.
    """

    def __init__(self, material: PermittivityModel):
        self.material = material

    @abstractmethod
    def response(self, xi: np.ndarray) -> MaterialResponse:
        ...

    @abstractmethod
    def zero_frequency_response(self) -> MaterialResponse:
        ...

    @abstractmethod
    def first_order(self, resp: MaterialResponse, k1, k2, cos, sin) -> ScatteringBlock:
        ...

    @abstractmethod
    def second_order(self, resp: MaterialResponse, k1, k2, cos, sin2) -> Tuple[np.ndarray, np.ndarray]:
        ...

    def response_at(self, xi: float) -> MaterialResponse:
        return self.zero_frequency_response() if xi == 0.0 else self.response(np.asarray(float(xi)))

    def B(self, xi: float, k1_vec: Sequence[float], k2_vec: Sequence[float]) -> np.ndarray:
        """2x2 matrix [[EE, EM], [ME, MM]] scattering k2_vec into k1_vec"""
        k1, k2, cos, sin = _geometry(k1_vec, k2_vec)
        return self.first_order(self.response_at(xi), k1, k2, cos, sin).as_matrix()

    def B2(self, xi: float, k1_vec: Sequence[float], k2_vec: Sequence[float]) -> Tuple[float, float]:
        """(B2_EE, B2_MM) at outer momentum k1_vec and intermediate momentum k2_vec"""
        k1, k2, cos, sin = _geometry(k1_vec, k2_vec)
        ee, mm = self.second_order(self.response_at(xi), k1, k2, cos, sin * sin)
        return float(ee), float(mm)


def _geometry(k1_vec, k2_vec) -> Tuple[float, float, float, float]:
    a = np.asarray(k1_vec, dtype=float)
    b = np.asarray(k2_vec, dtype=float)
    k1, k2 = float(np.hypot(*a)), float(np.hypot(*b))
    if k1 == 0.0 or k2 == 0.0:
        raise DomainError("scattering amplitudes need non-zero in-plane momenta")
    cos = float(a @ b) / (k1 * k2)
    sin = float(a[0] * b[1] - a[1] * b[0]) / (k1 * k2)
    return k1, k2, cos, sin


class DielectricKernel(KernelProvider):
    """Amplitudes of a deformed dielectric half-space to first and second order in the height"""

    def response(self, xi: np.ndarray) -> MaterialResponse:
        eps = np.asarray(permittivity(self.material, xi))
        kappa = np.asarray(xi) / HBAR_C
        return MaterialResponse('finite', kappa, eps, eps * kappa ** 2)

    def zero_frequency_response(self) -> MaterialResponse:
        limit = zero_frequency_limit(self.material)
        zero = np.zeros(())
        if limit.kind == 'dielectric':
            return MaterialResponse('dielectric', zero, np.asarray(limit.epsilon), zero)
        if limit.kind == 'perfect':
            raise DomainError("use PerfectConductorKernel for ideal mirrors")
        return MaterialResponse(limit.kind, zero, np.asarray(math.inf), np.asarray(limit.screening))

    def first_order(self, resp: MaterialResponse, k1, k2, cos, sin) -> ScatteringBlock:
        if resp.kind in ('conductor', 'plasma'):
            p2 = resp.eps_kappa2
            s1, s2 = np.sqrt(k1 * k1 + p2), np.sqrt(k2 * k2 + p2)
            ones = np.ones(np.broadcast(k1, k2, cos).shape)
            return ScatteringBlock(ones, 0.0 * ones, 0.0 * ones, -p2 * cos / ((k1 + s1) * (k2 + s2)))

        eps, kappa = resp.eps, resp.kappa
        em1 = eps - 1.0
        q1, q2 = np.sqrt(k1 * k1 + kappa ** 2), np.sqrt(k2 * k2 + kappa ** 2)
        s1, s2 = np.sqrt(k1 * k1 + resp.eps_kappa2), np.sqrt(k2 * k2 + resp.eps_kappa2)
        tm1, tm2 = eps * q1 + s1, eps * q2 + s2
        te1, te2 = q1 + s1, q2 + s2
        ee = em1 * (eps * k1 * k2 + s1 * s2 * cos) / (tm1 * tm2)
        em = -em1 * kappa * s1 * sin / (tm1 * te2)
        me = -em1 * kappa * s2 * sin / (te1 * tm2)
        mm = -em1 * kappa ** 2 * cos / (te1 * te2)
        return ScatteringBlock(ee, em, me, mm)

    def second_order(self, resp: MaterialResponse, k1, k2, cos, sin2) -> Tuple[np.ndarray, np.ndarray]:
        cos2 = cos * cos
        if resp.kind in ('conductor', 'plasma'):
            p2 = resp.eps_kappa2
            s1, s2 = np.sqrt(k1 * k1 + p2), np.sqrt(k2 * k2 + p2)
            mm = -2.0 * p2 / (k1 + s1) ** 2 * (cos2 * (s1 + k2 - s2) + sin2 * (s1 - s2))
            return 2.0 * k2 * np.ones(np.shape(mm)), mm

        eps, kappa = resp.eps, resp.kappa
        kappa2, ek2 = kappa ** 2, resp.eps_kappa2
        em1 = eps - 1.0
        q1, q2 = np.sqrt(k1 * k1 + kappa2), np.sqrt(k2 * k2 + kappa2)
        s1, s2 = np.sqrt(k1 * k1 + ek2), np.sqrt(k2 * k2 + ek2)
        ds = (k1 * k1 - k2 * k2) / (s1 + s2)  # s1 - s2
        tm2 = eps * q2 + s2

        te_bracket = cos2 * (ds + q2) + sin2 * (eps * q2 * ds + s2 * (s1 + q2)) / tm2
        mm = -2.0 * em1 * kappa2 / (q1 + s1) ** 2 * te_bracket

        ss_minus = (k1 * k1 * k2 * k2 + ek2 * (k1 * k1 + k2 * k2)) / (s1 * s2 + ek2)  # s1 s2 - eps kappa^2
        term1 = kappa2 * s1 * sin2 * (eps * (q2 - ds) + s1) / (q2 + s2)
        term2 = (eps * k1 * k2 + s1 * s2 * cos) * (em1 * k1 * k2 + s1 * cos * (q2 + s2)) / tm2
        term3 = s1 * cos * (k1 * k2 - cos * ss_minus)
        ee = 2.0 * em1 / (eps * q1 + s1) ** 2 * (term1 + term2 + term3)
        return ee, mm


class PerfectConductorKernel(KernelProvider):
    """Analytic eps -> infinity limit of the dielectric amplitudes"""

    def __init__(self, material: PermittivityModel = PerfectConductor()):
        super().__init__(material)

    def response(self, xi: np.ndarray) -> MaterialResponse:
        kappa = np.asarray(xi) / HBAR_C
        return MaterialResponse('finite', kappa, np.asarray(math.inf), np.asarray(math.inf))

    def zero_frequency_response(self) -> MaterialResponse:
        zero = np.zeros(())
        return MaterialResponse('perfect', zero, np.asarray(math.inf), np.asarray(math.inf))

    def first_order(self, resp: MaterialResponse, k1, k2, cos, sin) -> ScatteringBlock:
        kappa = resp.kappa
        q1, q2 = np.sqrt(k1 * k1 + kappa ** 2), np.sqrt(k2 * k2 + kappa ** 2)
        ee = (k1 * k2 + kappa ** 2 * cos) / (q1 * q2)
        em = -kappa * sin / q1
        me = -kappa * sin / q2
        mm = -cos * np.ones(np.shape(ee))
        return ScatteringBlock(ee, em, me, mm)

    def second_order(self, resp: MaterialResponse, k1, k2, cos, sin2) -> Tuple[np.ndarray, np.ndarray]:
        kappa2 = resp.kappa ** 2
        q1, q2 = np.sqrt(k1 * k1 + kappa2), np.sqrt(k2 * k2 + kappa2)
        mm = -2.0 * (cos * cos * q2 + sin2 * kappa2 / q2)
        ee = 2.0 / (q1 * q1) * (kappa2 * q2 * sin2 + (k1 * k2 + kappa2 * cos) ** 2 / q2)
        return ee, mm


def provider_for(material: PermittivityModel) -> KernelProvider:
    if isinstance(material, PerfectConductor):
        return PerfectConductorKernel(material)
    return DielectricKernel(material)


# --- f_n ----------------------------------------------------------------------

def _propagators(pair: PlatePair, xi: Optional[np.ndarray], kappa, k, d: float) -> Tuple[np.ndarray, np.ndarray]:
    """(N_E, N_M) = q r2 e^{-2qd} / g at momentum k; xi None selects the zero-frequency limits"""
    if xi is None:
        r1 = reflection_zero_freq(pair.material1, k)
        r2 = reflection_zero_freq(pair.material2, k)
    else:
        r1 = reflection(pair.material1, xi, k)
        r2 = reflection(pair.material2, xi, k)
    q = np.sqrt(k * k + kappa ** 2)
    u = 2.0 * q * d
    out = []
    for a, b in zip(r1, r2):
        _, den = round_trip(a, b, u)
        out.append(q * b / den)
    return out[0], out[1]


def _f_values(provider: KernelProvider, resp: MaterialResponse, k1, k2, cos, sin, n1, n2) -> np.ndarray:
    b12 = provider.first_order(resp, k1, k2, cos, sin)
    b21 = provider.first_order(resp, k2, k1, cos, -sin)
    b2_ee, b2_mm = provider.second_order(resp, k1, k2, cos, sin * sin)
    ne1, nm1 = n1
    ne2, nm2 = n2
    e_part = ne1 * (b2_ee + 2.0 * (ne2 * b12.ee * b21.ee + nm2 * b12.em * b21.me))
    m_part = nm1 * (b2_mm + 2.0 * (nm2 * b12.mm * b21.mm + ne2 * b12.me * b21.em))
    return -(e_part + m_part)


def f_n(provider: KernelProvider, pair: PlatePair, n: int, k1_vec: Sequence[float],
        k2_vec: Sequence[float], d: float, xi: Optional[float] = None) -> float:
    """Integrand of the kernel at Matsubara index n (or at an explicit frequency xi)"""
    if not d > 0.0:
        raise DomainError(f"separation must be > 0 nm, got {d}")
    if xi is None:
        if pair.grid.mode != 'finite':
            raise DomainError("f_n by index needs a finite-temperature grid; pass xi at T = 0")
        xi = float(pair.grid.matsubara(n))
    k1, k2, cos, sin = _geometry(k1_vec, k2_vec)
    try:
        resp = provider.response_at(xi)
        kappa = xi / HBAR_C
        freq = None if xi == 0.0 else np.asarray(xi)
        n1 = _propagators(pair, freq, kappa, np.asarray(k1), d)
        n2 = _propagators(pair, freq, kappa, np.asarray(k2), d)
        return float(_f_values(provider, resp, k1, k2, cos, sin, n1, n2))
    except DomainError:
        raise
    except Exception as e:
        raise RuntimeError(f"kernel evaluation failed at k'={tuple(k1_vec)}, k''={tuple(k2_vec)}, xi={xi}: {e}") from e


# --- momentum integration -------------------------------------------------------

def _mu_upper(k: float, kappa_max: float, d: float) -> float:
    """Elliptic radius covering every k' with 2d(q' - kappa) up to the rule's last edge"""
    reach = QUADRATURE_CONFIG['panel_last_edge'] / (2.0 * d)
    k_max = math.sqrt((kappa_max + reach) ** 2 - kappa_max ** 2)
    return math.acosh(1.0 + 2.0 * k_max / k)


def _elliptic_nodes(k: float, mu_upper: float, nu_order: int, branch: int):
    mu, w_mu = uniform_panel_rule(round(mu_upper, 6), ANGULAR_CONFIG['radial_panel_width'],
                                  ANGULAR_CONFIG['radial_order'])
    nu, w_nu = gauss_legendre(nu_order, 0.0, math.pi)
    mu, nu = mu[:, None], nu[None, :]
    sinh_half2 = np.sinh(0.5 * mu) ** 2
    near = k * (sinh_half2 + np.sin(0.5 * nu) ** 2)  # (k/2)(cosh mu - cos nu)
    far = k * (sinh_half2 + np.cos(0.5 * nu) ** 2)  # (k/2)(cosh mu + cos nu)
    sinh2, sin2 = np.sinh(mu) ** 2, np.sin(nu) ** 2
    base = sinh2 + sin2
    cos = (sinh2 - sin2) / base
    sin = -2.0 * np.sinh(mu) * np.sin(nu) / base
    if branch > 0:
        k1, k2 = near, far
    else:
        k1, k2, sin = far, near, -sin
    # d^2k' = k' k'' dmu dnu; nu in [0, pi] counts twice
    weight = 2.0 * k1 * k2 * w_mu[:, None] * w_nu[None, :] / (4.0 * math.pi ** 2)
    return k1, k2, cos, sin, weight


def _sample_block(provider: KernelProvider, pair: PlatePair, d: float, ks: Sequence[float],
                  xi: Optional[np.ndarray], nu_order: int, branch: int) -> np.ndarray:
    """Momentum integrals of f for every k in ks at a block of frequencies (xi None: n = 0)"""
    if xi is None:
        kappa_col = np.zeros((1, 1))
        resp_polar = resp_ell = provider.zero_frequency_response()
        freq_polar = freq_ell = None
        kappa_max = 0.0
    else:
        kappa_col = (xi / HBAR_C)[:, None]
        freq_polar, freq_ell = xi[:, None], xi[:, None, None]
        resp_polar, resp_ell = provider.response(freq_polar), provider.response(freq_ell)
        kappa_max = float(np.max(xi)) / HBAR_C

    out = np.empty((kappa_col.shape[0], len(ks)))
    for index, k in enumerate(ks):
        if k == 0.0:
            q, kk, u, measure = radial_nodes(kappa_col, d)
            n = _propagators(pair, freq_polar, kappa_col, kk, d)
            f = _f_values(provider, resp_polar, kk, kk, 1.0, 0.0, n, n)
            out[:, index] = np.sum(measure * f, axis=-1)
        else:
            kappa_ell = kappa_col[:, :, None]
            k1, k2, cos, sin, weight = _elliptic_nodes(k, _mu_upper(k, kappa_max, d), nu_order, branch)
            n1 = _propagators(pair, freq_ell, kappa_ell, k1, d)
            n2 = _propagators(pair, freq_ell, kappa_ell, k2, d)
            f = _f_values(provider, resp_ell, k1, k2, cos, sin, n1, n2)
            out[:, index] = np.sum(weight * f, axis=(-2, -1))
    return out


@dataclass(frozen=True)
class KernelSamples:
    ks: Tuple[float, ...]
    values: np.ndarray
    terms_used: int
    converged: bool
    angular_order: int
    angular_converged: bool


def _elements_per_frequency(ks: Sequence[float], nu_order: int) -> int:
    radial = len(uniform_panel_rule(12.0, ANGULAR_CONFIG['radial_panel_width'], ANGULAR_CONFIG['radial_order'])[0])
    return max(1, sum(radial * nu_order if k > 0.0 else 64 for k in ks))


def kernel_samples(provider: KernelProvider, pair: PlatePair, ks: Sequence[float], d: float,
                   branch: int = 1) -> KernelSamples:
    """G(k) at several momenta sharing one Matsubara truncation, with angular order doubling"""
    if not d > 0.0:
        raise DomainError(f"separation must be > 0 nm, got {d}")
    if any(k < 0.0 for k in ks):
        raise DomainError("kernel momentum must be >= 0")
    requested = tuple(float(k) for k in ks)
    samples = requested if 0.0 in requested else (0.0,) + requested

    order = ANGULAR_CONFIG['initial_order']
    previous = None
    fixed_terms = None
    angular_converged = True
    while True:
        result = frequency_sum(
            pair.grid, d,
            lambda: _sample_block(provider, pair, d, samples, None, order, branch)[0],
            lambda xi: _sample_block(provider, pair, d, samples, xi, order, branch),
            _elements_per_frequency(samples, order),
            fixed_terms=fixed_terms,
        )
        values = np.asarray(result.value, dtype=float)
        if fixed_terms is None:
            fixed_terms = result.terms_used
            series_converged = result.converged
        if all(k == 0.0 for k in samples):
            break
        if previous is not None:
            change = float(np.max(np.abs(values - previous)))
            scale = float(np.max(np.abs(values)))
            variation = float(np.max(np.abs(values - values[samples.index(0.0)])))
            if change <= ANGULAR_CONFIG['rel_tol'] * scale or change <= ANGULAR_CONFIG['variation_rel_tol'] * variation:
                break
        if order >= ANGULAR_CONFIG['max_order']:
            angular_converged = False
            logger.warning(f"angular rule not converged at order {order} (d={d} nm, k={requested})")
            break
        previous = values
        order *= 2

    picked = np.array([values[samples.index(k)] for k in requested])
    return KernelSamples(requested, picked, fixed_terms, series_converged, order, angular_converged)


@dataclass(frozen=True)
class KernelValue:
    value: float
    terms_used: int
    converged: bool
    angular_order: int

    def __float__(self):
        return float(self.value)


def kernel_G(provider: KernelProvider, pair: PlatePair, k: float, d: float, branch: int = 1) -> KernelValue:
    """G(k; d) in eV/nm^4.

    branch -1 builds the integrand from f_n(k', k' - k). Rotating k' by pi
    maps one branch onto the other, so either branch already equals the
    symmetrised average over +k and -k.
    """
    samples = kernel_samples(provider, pair, [k], d, branch)
    return KernelValue(float(samples.values[0]), samples.terms_used,
                       samples.converged and samples.angular_converged, samples.angular_order)


# --- gradient coefficients ----------------------------------------------------

@dataclass(frozen=True)
class GradientCoefficients:
    gamma: float  # eV/nm^4
    delta: float  # eV/nm^2
    delta_error: float
    mu: Optional[float] = None  # eV/nm^3
    diagnostics: Dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get('converged', True))


def _gamma_check(gamma: float, d2: float) -> float:
    reference = 0.5 * d2
    scale = max(abs(gamma), abs(reference))
    return 0.0 if scale == 0.0 else abs(gamma - reference) / scale


def gradient_coefficients(provider: KernelProvider, pair: PlatePair, d: float,
                          step_kd: float = DIFF_CONFIG['kernel_step_kd'],
                          levels: int = DIFF_CONFIG['kernel_levels'],
                          with_mu: bool = False, check_gamma: bool = True) -> GradientCoefficients:
    """gamma = G(0) and delta = G''(0)/2 by Richardson extrapolation in k.

    G carries a |k|^3 term, so the second differences are extrapolated in
    h, h^2, h^3 rather than in even powers. The gamma-check compares with
    F''_pp summed over the same Matsubara terms as the kernel.
    """
    if not d > 0.0:
        raise DomainError(f"separation must be > 0 nm, got {d}")
    steps = tuple(step_kd / d / 2.0 ** j for j in range(levels + 1))
    samples = kernel_samples(provider, pair, (0.0,) + steps, d)
    gamma = float(samples.values[0])
    shifted = [float(v) for v in samples.values[1:]]
    curvature: DerivativeResult = richardson_second_difference(
        gamma, shifted, shifted, steps, orders=tuple(range(1, len(steps))))

    diagnostics = {
        'k_steps': steps,
        'richardson_error': 0.5 * curvature.error,
        'richardson_monotone': curvature.monotone,
        'matsubara_terms': samples.terms_used,
        'angular_order': samples.angular_order,
        'converged': samples.converged and samples.angular_converged and curvature.converged,
    }

    if check_gamma:
        fixed = samples.terms_used if pair.grid.mode == 'finite' else None
        d2 = plate_quantities(pair, d, fixed).second_derivative
        deviation = _gamma_check(gamma, d2)
        diagnostics['gamma_check'] = deviation
        if deviation > GAMMA_CHECK_TOL:
            raise ConvergenceError(
                f"gamma-check failed at d={d} nm: G(0)={gamma:.10e} vs F''/2={0.5 * d2:.10e} "
                f"(relative deviation {deviation:.2e})")

    mu = first_order_coefficient(provider, pair, d) if with_mu else None
    return GradientCoefficients(gamma, 0.5 * curvature.value, 0.5 * curvature.error, mu, diagnostics)


def first_order_coefficient(provider: KernelProvider, pair: PlatePair, d: float) -> float:
    """mu = k_B T sum' int d^2k/(2pi)^2 sum_Q 2 N_Q(k) B_QQ(k, k); equals F'_pp"""

    def block(xi: Optional[np.ndarray]) -> np.ndarray:
        if xi is None:
            kappa, resp, freq = np.zeros((1, 1)), provider.zero_frequency_response(), None
        else:
            kappa, freq = (xi / HBAR_C)[:, None], xi[:, None]
            resp = provider.response(freq)
        q, k, u, measure = radial_nodes(kappa, d)
        n_e, n_m = _propagators(pair, freq, kappa, k, d)
        b = provider.first_order(resp, k, k, 1.0, 0.0)
        return np.sum(measure * 2.0 * (n_e * b.ee + n_m * b.mm), axis=-1)

    result = frequency_sum(pair.grid, d, lambda: block(None)[0], block, 64)
    return float(result.value)


@dataclass(frozen=True)
class DeltaEstimate:
    delta: float
    terms_used: int
    converged: bool


def delta_inner(provider: KernelProvider, pair: PlatePair, d: float,
                angular_order: int = 32) -> DeltaEstimate:
    """delta from a five-point stencil of f_n(k', k' + h x) at every k' node, then integrated"""
    if not d > 0.0:
        raise DomainError(f"separation must be > 0 nm, got {d}")
    phi, w_phi = gauss_legendre(angular_order, 0.0, math.pi)
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)

    def block(xi: Optional[np.ndarray]) -> np.ndarray:
        if xi is None:
            kappa, resp, freq = np.zeros((1, 1)), provider.zero_frequency_response(), None
        else:
            kappa, freq = (xi / HBAR_C)[:, None], xi[:, None, None]
            resp = provider.response(freq)
        q, k, u, measure = radial_nodes(kappa, d)
        k1 = k[..., None]
        kappa3 = kappa[..., None]
        h = np.minimum(DIFF_CONFIG['inner_step_kd'] / d, DIFF_CONFIG['inner_step_fraction'] * k1)
        n1 = _propagators(pair, freq, kappa3, k1, d)
        values = {}
        for s in (-2, -1, 0, 1, 2):
            shift = s * h
            k2 = np.sqrt(k1 * k1 + shift * shift + 2.0 * shift * k1 * cos_phi)
            cos = (k1 + shift * cos_phi) / k2
            sin = -shift * sin_phi / k2
            n2 = _propagators(pair, freq, kappa3, k2, d)
            values[s] = _f_values(provider, resp, k1, k2, cos, sin, n1, n2)
        stencil = (-values[2] + 16.0 * values[1] - 30.0 * values[0] + 16.0 * values[-1] - values[-2]) / (12.0 * h * h)
        angular = np.sum(w_phi * stencil, axis=-1) / math.pi
        return 0.5 * np.sum(measure * angular, axis=-1)

    result = frequency_sum(pair.grid, d, lambda: block(None)[0], block, 5 * 160 * angular_order)
    return DeltaEstimate(float(result.value), result.terms_used, result.converged)


@dataclass(frozen=True)
class QuadraticFit:
    gamma: float
    delta: float
    residual_ratio: float  # max |G - gamma - delta k^2 - c |k|^3| / |delta k_max^2|
    cubic: float = 0.0  # c, eV/nm
    quadratic_residual_ratio: float = 0.0  # same ratio for the fit without the |k|^3 column


def quadratic_fit_residual(provider: KernelProvider, pair: PlatePair, d: float,
                           kd_values: Sequence[float] = tuple(np.linspace(0.01, 0.1, 6))) -> QuadraticFit:
    """Least-squares fit of G(k) = gamma + delta k^2 + c |k|^3 over the given k d values.

    The non-analytic |k|^3 term comes from the small-momentum end of the
    intermediate-momentum integral; without it the residual of a pure
    quadratic is of order c k_max / delta.
    """
    ks = np.asarray(kd_values, dtype=float) / d
    samples = kernel_samples(provider, pair, (0.0,) + tuple(ks), d)
    k_all = np.concatenate(([0.0], ks))
    values = np.asarray(samples.values, dtype=float)
    x = k_all * d
    top = x.max() ** 2

    full = np.column_stack([np.ones_like(x), x ** 2, x ** 3])
    (gamma, a2, a3), *_ = np.linalg.lstsq(full, values, rcond=None)
    residual = np.max(np.abs(values - full @ np.array([gamma, a2, a3])))

    plain = full[:, :2]
    line, *_ = np.linalg.lstsq(plain, values, rcond=None)
    plain_residual = np.max(np.abs(values - plain @ line))
    return QuadraticFit(float(gamma), float(a2 / d ** 2), float(residual / abs(a2 * top)), float(a3 / d ** 3),
                        float(plain_residual / abs(line[1] * top)))
