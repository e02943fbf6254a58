import os

APP_NAME = "turbobw"

# Project base dir (parent of package folder)
BASE_DIR = os.path.dirname(os.path.dirname(__file__))

# Paths
DATA_DIR = os.path.join(BASE_DIR, "data")
LOG_PATH = os.path.join(DATA_DIR, "turbobw.log")
DEFAULT_CONFIG_PATH = os.path.join(DATA_DIR, "experiment.env")
DEFAULT_RESULTS_PATH = os.path.join(DATA_DIR, "results.csv")

# Environment overrides, e.g. TURBOBW_N_FRAMES=2
ENV_PREFIX = "TURBOBW_"

# Modulation: symbol index 0 <-> bit 0 <-> +1, index 1 <-> bit 1 <-> -1
ALPHABET_SIZE = 2
BPSK_SYMBOLS = (1.0, -1.0)

# Numerical floors
PROB_FLOOR = 1e-30          # before any division of probabilities
PRIOR_FLOOR = 1e-6          # decoder feedback before it enters the transitions
VARIANCE_FLOOR = 1e-6       # signal power normalised to 1
OCCUPANCY_FLOOR = 1e-8      # times T; below it a parameter is not re-estimated
NORM_TOL = 1e-9             # probability rows must sum to 1 within this
INIT_TOL = 1e-12            # initial distributions / symbol priors

# Defaults
DEFAULT_TAPS = (0.407, 0.815, 0.407)
DEFAULT_GENERATORS = (0o7, 0o5)
DEFAULT_CONSTRAINT_REGISTERS = 2
DEFAULT_FRAME_LENGTH = 1024
DEFAULT_INTERLEAVER_SEED = 0
DEFAULT_SNR_DB = (2.0, 4.0, 6.0)
DEFAULT_MODES = ("joint", "standalone")
DEFAULT_TURBO_ITERS = 20
DEFAULT_EM_ITERS_PER_TURBO = 1
DEFAULT_INIT_ERROR = 0.2
DEFAULT_VARIANCE_MODE = "fixed_true"
DEFAULT_N_FRAMES = 50
DEFAULT_SEED = 2024
DEFAULT_WORKERS = 1

# Convergence summary: within this fraction of the final MSE counts as converged
PLATEAU_TOLERANCE = 0.1
