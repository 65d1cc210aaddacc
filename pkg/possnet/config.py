"""
Run settings - caps, solver budgets, default stage lists.
"""

from fractions import Fraction

DB_PATH = "possnet_cache.db"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Pattern enumeration refuses joint spaces above 2**24 outcomes
ENUMERATION_CAP_BITS = 24
# Inflation event spaces (observer-copy joint outcomes)
INFLATION_MAX_JOINT_BITS = 20
LP_MAX_VARIABLES = 2 ** 20
LP_MAX_PIVOTS = 200_000

SAT_MAX_CONFLICTS = 100_000
SAT_TIME_LIMIT = 120.0
SAT_VAR_DECAY = 0.95
SAT_RESTART_UNIT = 100

POSSIBLE_WORLDS_NODE_BUDGET = 5_000_000
SET_COVER_EXACT_LIMIT = 20

# Largest source alphabet worth trying before a local model is ruled out,
# matched to a scenario by network structure
CARDINALITY_CAPS = {
    "triangle": 6,
    "square": 12,
}

DEFAULT_STAGES = {
    "triangle": (
        "sat-local@2",
        "sat-local@6",
        "ring@6",
        "ring@9",
        "ring@12",
        "spiral",
    ),
    "square": (
        "factorization",
        "sat-local@2",
        "sat-local@3",
        "ring@8",
        "ring@12",
        "web@2",
        "possible-worlds@3..12",
    ),
}

W_GRID = 10
W_BORDER_OFFSET = Fraction(1, 100)
W_TOLERANCE = Fraction(1, 1000)
