"""
Solver Constants and Defaults
------------------------------
Numerical defaults for the fixed-point scheme, its diagnostics and the
command-line front end, plus process exit codes and output file names.

Author: F.Ahmadzade
"""

# ==================== Fixed-point iteration ====================
# Constant initial guess U^(0) = C (Test 2 uses C = 150)
DEFAULT_INITIAL_CONSTANT = 150.0

# Stopping tolerance per player, compared with the sup-norm increment
DEFAULT_TOLERANCE = 1e-6

DEFAULT_MAX_ITERATIONS = 5000

# Trailing iterations inspected by the period-2 oscillation detector
OSCILLATION_WINDOW = 10

# Multiplier on ||f||_inf in h = dx / ||f||_inf
DEFAULT_F_NORM_SAFETY = 1.0

# Largest payoff table (nodes x control pairs x stencil corners) kept in memory
# between sweeps; bigger problems rebuild their tables chunk by chunk.
MAX_CACHED_TABLE_ENTRIES = 40_000_000

# Upper bound on nodes x control pairs handled in one vectorized block
MAX_CHUNK_PAIRS = 2_000_000

# Dirichlet data taken from the exact solution instead of a constant
BOUNDARY_EXACT = 'exact'

ON_NO_NASH_HALT = 'halt'
ON_NO_NASH_FREEZE = 'freeze-and-flag'
ON_NO_NASH_POLICIES = (ON_NO_NASH_HALT, ON_NO_NASH_FREEZE)

STATUS_CONVERGED = 'converged'
STATUS_NOT_CONVERGED = 'not-converged'
STATUS_HALTED = 'halted'

# ==================== Diagnostics ====================
# Relative step for the Jacobian: delta = 1e-6 * (1 + ||U||_inf)
JACOBIAN_RELATIVE_STEP = 1e-6

# Rows whose delta and delta/2 estimates disagree by more than 10 % are flagged
JACOBIAN_DISAGREEMENT = 0.1
JACOBIAN_ABSOLUTE_FLOOR = 1e-9

# A sample gap larger than 10x the slope-implied change counts as a jump
SCAN_JUMP_FACTOR = 10.0

# Default scan range: the last two values of a node, padded by this many times their spread
SCAN_PAD_FACTOR = 4.0

# A3 kink threshold: 10 * dx * (typical |u''|)
KINK_FACTOR = 10.0

# A2: growth constant on the full grid vs. its inner half
GROWTH_RATIO_LIMIT = 1.5

ADMISSIBLE = 'admissible-on-grid'
NOT_ADMISSIBLE = 'not-admissible'
INCONCLUSIVE = 'inconclusive'

# ==================== Trajectories ====================
# Default horizon = 20 / min(lambda_i)
HORIZON_FACTOR = 20.0

# ==================== Command line ====================
EXIT_CONVERGED = 0
EXIT_IO_FAILURE = 1
EXIT_NOT_CONVERGED = 2
EXIT_HALTED = 3
EXIT_CONFIG_ERROR = 4

VALUE_FIELDS_FILE = 'value_fields.csv'
FEEDBACK_FILE = 'feedback.csv'
CONVERGENCE_FILE = 'convergence.csv'
ERROR_TABLE_FILE = 'error_table.csv'
RUN_REPORT_FILE = 'run_report.json'
