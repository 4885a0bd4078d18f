# Run configuration example
# Usage: python cli.py theta1 --config config.example.py
# One KEY = literal per line; the file is parsed, never executed. Flags override these values.

# Materials: gold-drude, perfect-conductor, drude:<wp eV>,<gamma eV>, plasma:<wp eV>,
# constant:<eps>, vacuum, tabulated (needs OPTICAL_FILE)
MATERIAL = 'gold-drude'  # both plates; use SPHERE_MATERIAL / PLATE_MATERIAL for a mixed pair
# PLASMA_FREQUENCY = 9.0  # eV, overrides the gold preset (also the tabulated extrapolation)
# DAMPING = 0.035  # eV
# OPTICAL_FILE = 'data/gold_drude_test_table.dat'  # energy (eV)  Im eps, '#' comments

# Temperature in kelvin, or 'zero'
TEMPERATURE = 300

# Geometry: 'sphere' (c1 = 1/4), 'paraboloid' (c1 = 0) or 'custom' with C1
GEOMETRY = 'sphere'
# C1 = 0.25
# HIGHER_COEFFICIENTS = [0.125, 0.078125]  # c2, c3, ... for 'custom' (profile command)
# RADIUS = 1e5  # nm, needed by the profile command

# Separation grid (nm)
D_MIN = 10
D_MAX = 10000
POINTS = 40
SPACING = 'log'

# Tolerances
SUM_TOL = 1e-7  # Matsubara sum, relative
QUAD_TOL = 1e-9  # profile functionals, relative
DIFF_LEVELS = 3  # Richardson levels for delta

# Output
OUTPUT_FORMAT = 'csv'  # or 'jsonl'
# OUTPUT = 'theta1_gold_300K.csv'
TIMING = False  # wall_time_s column; off keeps the CSV byte-identical across runs

# Execution
WORKERS = 4
CACHE_DIR = '.casimir_cache'
USE_CACHE = True
