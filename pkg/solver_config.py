"""
Solver configuration: physical constants, tolerances and cache settings
"""

# Version tag stored with every cached result; bump on any numerical change
SOLVER_VERSION = '1.1.0'

# Conversion constants (CODATA). Lengths in nm, energies and frequencies in eV.
HBAR_C = 197.3269804  # eV nm
K_B = 8.617333262e-5  # eV / K

# Quadrature settings
QUADRATURE_CONFIG = {
    # scalar adaptive quadrature (scipy.integrate.quad)
    'rel_tol': 1e-8,
    'abs_tol': 0.0,
    'max_subdivisions': 200,
    'decay_scale': 1.0,  # e-folding length assumed by the semi-infinite map

    # composite Gauss-Legendre rule on geometric panels, used for u = 2qd and t = 2d xi / hbar c
    'panel_order': 10,
    'panel_ratio': 2.0,  # ratio 4 leaves [16, 64] too wide for the u^3 e^-u tail
    'panel_first_edge': 4.0 ** -7,
    'panel_last_edge': 64.0,  # e^-64 is far below double precision relative to O(1) terms
}

# Matsubara sums
SERIES_CONFIG = {
    'rel_tol': 1e-7,
    'consecutive_small_terms': 3,
    'envelope_factor': 40,  # n_max = ceil(40 * lambda_T / (4 pi d))
    'min_terms': 16,
    'chunk_elements': 400000,  # array elements evaluated per vectorised block
}

# Richardson extrapolation of symmetric second differences
DIFF_CONFIG = {
    'step': 0.1,
    'levels': 4,
    'kernel_step_kd': 0.02,  # base momentum step k0 = 0.02 / d
    'kernel_levels': 3,
    'inner_step_kd': 0.01,  # five-point stencil step for the inner-integrand path
    'inner_step_fraction': 0.05,  # ... never larger than this fraction of |k'|
}

# Angular (nu) Gauss-Legendre rule for the kernel at k > 0
ANGULAR_CONFIG = {
    'initial_order': 16,
    'max_order': 128,
    'rel_tol': 1e-8,  # relative to G
    'variation_rel_tol': 1e-4,  # relative to G(k) - G(0)
    'radial_panel_width': 0.5,  # width of Gauss panels in the elliptic radial variable mu
    'radial_order': 8,
}

# Permittivity models and optical data
DIELECTRIC_CONFIG = {
    'gold_plasma_frequency': 9.0,  # eV
    'gold_damping': 0.035,  # eV
    'cache_points': 256,
    'cache_xi_min': 1e-6,  # eV
    'cache_xi_max': 1e4,  # eV
    'kk_panel_order': 8,
    'kk_max_panel_width': 0.25,  # in ln(omega)
    'kk_series_threshold': 1e-3,  # xi / omega_max below which the tail uses its series
}

# Profiles and the gradient-expansion functional
GEOMETRY_CONFIG = {
    'cutoff_factor': 20.0,  # radial cutoff where H = d + 20 min(d, R)
    'coefficient_nodes': 32,
    'check_points': 3,
    'small_d_separations': (20.0, 10.0, 5.0),  # nm
    'expansion_warning_ratio': 0.1,  # warn when d / R exceeds this
    'tail_min_exponent': 2.05,  # tail of the gradient term needs delta ~ H^-p with p > 2
    'experimental_band': (164.0, 300.0),  # nm
    'experimental_bound': 0.4,
}

# Result cache
CACHE_CONFIG = {
    'directory': '.casimir_cache',
    'database': 'results.sqlite',
}

# Output formatting
OUTPUT_CONFIG = {
    'float_format': '.12e',
    'default_format': 'csv',
}

# Logging
LOGGING_CONFIG = {
    'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    'log_file': 'casimir_sweep.log',
    'max_alerts': 100,
    'richardson_alert_ratio': 1e-2,  # alert when Richardson error / |delta| exceeds this
}
