"""
Configuration and constants for renosched
"""

# BPR congestion function defaults (a=0.15, b=4)
DEFAULT_BPR_A: float = 0.15
DEFAULT_BPR_B: float = 4.0

# A closed link keeps a tiny capacity and a huge free-flow time so that every
# OD pair stays reachable
CLOSURE_CAPACITY_FACTOR: float = 1e-6
CLOSURE_FFT_FACTOR: float = 1e6

# Frank-Wolfe
DEFAULT_TAP_TOLERANCE: float = 1e-4
DEFAULT_TAP_MAX_ITERS: int = 4000
LINE_SEARCH_TOLERANCE: float = 1e-10
LINE_SEARCH_MAX_ITERS: int = 64

# NSGA-II
DEFAULT_POPULATION_SIZE: int = 100
DEFAULT_CROSSOVER_RATE: float = 0.9
CROSSOVER_GENE_SWAP_PROB: float = 0.5
MUTATION_MAX_STEP: int = 4

# Surrogates
DEFAULT_N_TREES: int = 200
DEFAULT_TREE_DEPTH: int = 6
DEFAULT_LEARNING_RATE: float = 0.1
DEFAULT_MIN_SAMPLES_LEAF: int = 5
MIN_TRAINING_SAMPLES: int = 20
RETRAIN_THRESHOLD: int = 64

# Instance generator (quarterly periods over 20 years)
DEFAULT_HORIZON: int = 80
DEFAULT_DURATION_MEAN: float = 5.0
MAX_DURATION: int = 12
DEFAULT_BUDGET_FACTOR: float = 1.7
DEFAULT_MAX_SIMULTANEOUS: int = 8
TRIAL_PROB_RANGE: tuple[float, float] = (0.02, 0.15)
ALLOWED_SUCCESSES_RANGE: tuple[int, int] = (0, 6)
FAILURE_COST_RANGE: tuple[float, float] = (5.0, 50.0)
COST_PER_PERIOD: float = 1.0
MAX_REDRAWS: int = 100
HARD_DEADLINE_THRESHOLD: float = 0.5

# Metrics
REFERENCE_POINT: tuple[float, float] = (1.1, 1.1)

# Environment variable with the log level
LOG_LEVEL_ENV: str = "RENOSCHED_LOG"
