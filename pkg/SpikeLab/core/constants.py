# --- CLI TEXT ---
HELP_MAIN_TEXT = """
SpikeLab - interior spike laboratory for the 1D spatial Solow model.

Verbs:
  run <scenario|config-path> [--check]   run a built-in scenario or an INI document
  list                                    show built-in scenarios and their defaults
  validate <config-path>                  parse and validate an INI document
  history [n]                             show the last n recorded runs
"""

EXIT_OK = 0
EXIT_CONFIG_INVALID = 2
EXIT_SOLVER_FAILURE = 3
EXIT_CHECK_FAILED = 4

# --- GRID ---
MIN_GRID_CELLS = 4
CELLS_PER_EPSILON = 16.0

# --- INNER PROBLEM ---
INNER_SOLVE_TOL = 1e-9
INNER_RESIDUAL_TOL = 1e-8
FAR_FIELD_TOL = 1e-10
INNER_Y_MIN = 20.0
INNER_Y_MARGIN = 15.0
INNER_Y_MAX = 4000.0
TAIL_SWITCH = 1e-6
QUAD_EPSREL = 1e-13
# Uniform core spacing is picked from this ladder so that nearby amplitudes share a grid.
INNER_DY_LADDER = (0.02, 0.01, 0.005, 0.0025, 0.00125, 0.000625)
INNER_POINTS_PER_CORE = 40.0
SUBINNER_MIN_XI = 3.0
SUBINNER_MAX_EPSILON = 0.05
SUBINNER_MIN_LOG_SEPARATION = 3.0

# --- MATCHING ---
S_MAX = 0.9
S_MIN_OVER_EPSILON = 0.1
MATCH_XTOL = 1e-14
MATCH_RTOL = 1e-12

# --- PDE SIMULATION ---
DT_UNDERFLOW_FACTOR = 1e-8
DEFAULT_CFL = 0.5
ROS_RTOL = 1e-5
ROS_ATOL = 1e-8
DT_GROWTH_MAX = 4.0
DT_SHRINK_MIN = 0.2
SPIKE_DEGENERACY_RATIO = 2.0
OSCILLATION_DEADBAND = 1e-3
MIN_EXTREMA = 3

# --- STABILITY ---
NLEP_RE_RANGE = (-2.0, 2.0)
NLEP_IM_RANGE = (0.0, 10.0)
NLEP_SEED_GRID = (17, 21)
NLEP_FAR_FIELD_TOL = 1e-4
NEWTON_TOL = 1e-11
NEWTON_MAX_ITER = 60
BRANCH_WARN = 1e-8
HOPF_TAU_TOL = 1e-3
EIG_RESIDUAL_TOL = 1e-8
CANONICAL_HALF_WIDTH = 40.0
CANONICAL_CELLS = 2000

# --- DRIFT ---
DRIFT_RTOL = 1e-8
DRIFT_TABLE_NODES = 40
DRIFT_CONSTRAINT_TOL = 1e-8

# --- SCENARIOS ---
EPSILON_LADDER = (2e-2, 1e-2, 5e-3, 2.5e-3, 1.25e-3)
THETA_LADDER = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
CSV_FLOAT_FORMAT = "%.12e"
