"""Constants for the gnlopt solver toolkit."""

from __future__ import annotations

# Evaluation floor: inclusive values below this are treated as empty nests.
DEGENERATE_WEIGHT = 1e-300

BETA_MARGIN_MIN = 1.0
BETA_MARGIN_REL = 0.01

# Nonlinear rows count as violated when the gap exceeds VIOLATION_TOL * (1 + |rhs|).
VIOLATION_TOL = 1e-6
ACCEPTANCE_TOL = 1e-6
CUT_DEDUP_DIGITS = 12
EXP_OVERFLOW_EXPONENT = 700.0

# LP kernel
LP_FEASIBILITY_TOL = 1e-7
LP_OPTIMALITY_TOL = 1e-9
LP_PIVOT_TOL = 1e-9
LP_REFACTOR_INTERVAL = 50
LP_DEGENERATE_FACTOR = 10
LP_MAX_REPAIRS = 3

# Branch and bound
DEFAULT_INT_TOL = 1e-6
DEFAULT_REL_GAP = 1e-6
DEFAULT_NODE_LIMIT = 100_000
DEFAULT_FRACTIONAL_ROUNDS = 3
NODE_BEST_BOUND = "best_bound"
NODE_DEPTH_FIRST = "depth_first"
NODE_SELECTIONS: tuple[str, ...] = (NODE_BEST_BOUND, NODE_DEPTH_FIRST)
BRANCH_MOST_FRACTIONAL = "most_fractional"
BRANCH_RULES: tuple[str, ...] = (BRANCH_MOST_FRACTIONAL,)

TERMINATION_OPTIMAL = "optimal"
TERMINATION_INFEASIBLE = "infeasible"
TERMINATION_NODE_LIMIT = "node_limit"
TERMINATION_TIME_LIMIT = "time_limit"
TERMINATION_CUT_LIMIT = "cut_limit"
TERMINATION_ERROR = "error"
LIMIT_TERMINATIONS: tuple[str, ...] = (TERMINATION_NODE_LIMIT, TERMINATION_TIME_LIMIT, TERMINATION_CUT_LIMIT)

# Assortment solvers
DEFAULT_BISECTION_TOL = 1e-7
ZERO_OPTOUT_FLOOR_FRACTION = 0.5

# Pricing
DEFAULT_EPSILON = 1e-3
PWLA_TAU_FRACTION = 1e-9
DEFAULT_POLISH_STARTS = 10
POLISH_MAX_SWEEPS = 50
POLISH_SCAN_POINTS = 16
POLISH_GOLDEN_TOL = 1e-9
CP_MAX_ROUNDS = 3
CP_IMPROVEMENT_TOL = 1e-6
CP_BETA_MARGIN = 1.0

# Oracle guards
ORACLE_MAX_PRODUCTS = 24
ORACLE_MAX_PATTERNS = 1_000_000
ORACLE_TENSOR_SUPPORT = 4

# Method tags
METHOD_BISECTION = "bisection"
METHOD_LOGCONVEX = "logconvex"
METHOD_MGNL = "mgnl"
METHOD_ZERO_OPTOUT = "zero_optout"
METHOD_JAP_DP = "jap_dp"
METHOD_JAP_CP = "jap_cp"
METHOD_ORACLE_ASSORT = "oracle_assort"
METHOD_ORACLE_JAP_DP = "oracle_jap_dp"
METHOD_ORACLE_JAP_CP = "oracle_jap_cp"

SOLVE_METHODS: tuple[str, ...] = (
    METHOD_BISECTION,
    METHOD_LOGCONVEX,
    METHOD_MGNL,
    METHOD_ZERO_OPTOUT,
    METHOD_JAP_DP,
    METHOD_JAP_CP,
)
ORACLE_METHODS: tuple[str, ...] = (
    METHOD_ORACLE_ASSORT,
    METHOD_ORACLE_JAP_DP,
    METHOD_ORACLE_JAP_CP,
)

# Instance kinds
KIND_GNL = "GNL"
KIND_MGNL = "MGNL"
KIND_JAP_DP = "JAP_DP"
KIND_JAP_CP = "JAP_CP"
INSTANCE_KINDS: tuple[str, ...] = (KIND_GNL, KIND_MGNL, KIND_JAP_DP, KIND_JAP_CP)

SCHEMA_VERSION = 1
FLOAT_DIGITS = 17
DEFAULT_CROSS_RATE = 1.2
PRICE_SCHEME_ARITHMETIC = "arithmetic"
PRICE_SCHEME_FINE = "fine"
PRICE_SCHEMES: tuple[str, ...] = (PRICE_SCHEME_ARITHMETIC, PRICE_SCHEME_FINE)

# One PCG64 stream per field family. Never renumber: appending a family keeps
# every existing draw stable.
RNG_STREAMS: dict[str, int] = {
    "sigma": 0,
    "membership": 1,
    "alpha": 2,
    "utility_u": 3,
    "revenue_x": 4,
    "preference_y": 5,
    "theta": 6,
    "price_mu": 7,
    "price_eta": 8,
    "price_gamma": 9,
}

# CLI
CSV_HEADER: tuple[str, ...] = (
    "instance",
    "method",
    "objective",
    "bound",
    "gap",
    "nodes",
    "cuts_oa",
    "cuts_sc",
    "cuts_mc",
    "seconds",
    "seed",
    "termination",
)
EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3
EXIT_ERROR = 4
ENV_SEED = "GNLOPT_SEED"
