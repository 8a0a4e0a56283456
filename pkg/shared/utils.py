"""
Shared Utilities and Constants
This file contains all constants, tolerances and helper functions used across the simulator,
the solvers and the command line front end.
"""

import os
import logging
from datetime import datetime

# ==================== POLYNOMIAL CONFIGURATION ====================

MAX_CHEBYSHEV_DEGREE = 512    # Largest degree accepted by basis conversion / extremum search
MAX_PHASE_DEGREE = 128        # Largest unit-circle degree accepted by phase synthesis
CHEBYSHEV_TOL = 1e-12         # Relative tolerance of basis conversions
EXTREMUM_SAMPLE_FACTOR = 8    # Chebyshev nodes per unit of degree in poly_max_on_interval
MIN_EXTREMUM_SAMPLES = 64

# ==================== PHASE SYNTHESIS CONFIGURATION ====================

MODULUS_TOL = 1e-12           # |P| may exceed 1 by at most this much
PAIR_TOL = 1e-9               # |P|^2 + |Q|^2 = 1 check, per unit of degree
ROOT_PAIRING_TOL = 1e-6       # Relative tolerance for conjugate-reciprocal root pairs
PEEL_TOL = 1e-9               # Vanishing constant term during layer peeling
DEFLATION_TOL = 1e-12         # Both leading coefficients below this => deflate
RECONSTRUCTION_TOL = 1e-8     # Accepted phase reconstruction error
UNITARITY_TOL = 1e-10         # 2x2 product unitary on the circle
LSQ_MAX_NFEV_FACTOR = 500     # least_squares evaluation cap per parameter
NEWTON_POLISH_STEPS = 3
POLISH_TOL = 1e-13            # peeled phases above this error get a least-squares polish
POLISH_MAX_NFEV_FACTOR = 20


def grid_size(degree):
    """
    Number of unit-circle sample angles used for a polynomial of the given degree.

    Args:
        degree (int): Polynomial degree

    Returns:
        int: 4 * degree + 64
    """
    return 4 * degree + 64


def pair_tolerance(degree):
    """Accepted deviation of |P|^2 + |Q|^2 from 1; root errors accumulate with the degree."""
    return PAIR_TOL * max(1, degree)


# ==================== BLOCK ENCODING CONFIGURATION ====================

ENCODING_TOL = 1e-10          # Block / unitarity residual accepted by verify_block_encoding
OPERATOR_TOL = 1e-12          # Unitarity of every constructed walk / controlled operator
RANK_TOL = 1e-14              # sigma below RANK_TOL * sigma_max treated as exact zero
EIGEN_ACTION_TOL = 1e-10
MAX_IDENTITY_ANCILLAS = 3     # Projector identity checks enumerate up to a = 3

# ==================== SOLVER CONFIGURATION ====================

BREAKDOWN_FACTOR = 1e-14      # |<r, rt>| < factor * ||r|| ||rt|| => breakdown
HEADROOM = 1e-10              # targets scaled by poly_max * (1 + HEADROOM)
LANCZOS_LUCKY_TOL = 1e-12     # delta <= tol * ||A|| => invariant subspace found
LANCZOS_SERIOUS_TOL = 1e-12   # |w^T v| <= tol => serious breakdown
DEFAULT_TOL = 1e-8
DEFAULT_MAXIT = 50
DEFAULT_SHOTS = 10 ** 6
DEFAULT_SEED = 0

# ==================== REPORT CONFIGURATION ====================

# Get the project root directory
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

SCHEMA_VERSION = "1.0"
REPORTS_DIR = os.path.join(PROJECT_ROOT, 'reports')
TRACE_COLUMNS = ["j", "alpha", "beta", "rnorm_est", "rnorm_true_if_available", "degree", "depth"]

# ==================== EXIT STATUSES ====================

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NOT_CONVERGED = 2
EXIT_BREAKDOWN = 3
EXIT_INPUT_ERROR = 4

# ==================== LOGGING CONFIGURATION ====================

LOGS_DIR = os.path.join(PROJECT_ROOT, 'logs')
LOG_ENV_VAR = 'GQSVT_LOG'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

LOG_LEVELS = {
    'error': logging.ERROR,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}


def resolve_log_level(value=None):
    """
    Map a GQSVT_LOG value to a logging level.

    Args:
        value (str): Level name; read from the environment when None

    Returns:
        tuple: (level, is_known)
    """
    if value is None:
        value = os.environ.get(LOG_ENV_VAR, 'info')
    key = value.strip().lower()
    if key in LOG_LEVELS:
        return LOG_LEVELS[key], True
    return logging.INFO, False


_level, _known_level = resolve_log_level()

# Configure logging
logging.basicConfig(
    level=_level,
    format=LOG_FORMAT,
    handlers=[
        logging.StreamHandler()
    ]
)

logger = logging.getLogger('GQSVT')
logger.setLevel(_level)


# ==================== HELPER FUNCTIONS ====================

def log_info(message):
    """Log an info message."""
    logger.info(message)


def log_error(message):
    """Log an error message."""
    logger.error(message)


def log_warning(message):
    """Log a warning message."""
    logger.warning(message)


def log_debug(message):
    """Log a debug message."""
    logger.debug(message)


def enable_file_logging():
    """
    Attach a dated log file under logs/ to the application logger.

    Returns:
        str: Path of the log file, or None if it could not be opened
    """
    try:
        os.makedirs(LOGS_DIR, exist_ok=True)
        log_file = os.path.join(LOGS_DIR, f'gqsvt_{datetime.now().strftime("%Y%m%d")}.log')
        for handler in logger.handlers:
            if isinstance(handler, logging.FileHandler) and handler.baseFilename == log_file:
                return log_file
        handler = logging.FileHandler(log_file)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        return log_file
    except OSError as e:
        log_error(f"Could not open log file: {e}")
        return None


def is_power_of_two(n):
    """Return True when n is a positive power of two."""
    n = int(n)
    return n > 0 and (n & (n - 1)) == 0


def next_power_of_two(n):
    """
    Smallest power of two that is >= n.

    Args:
        n (int): Positive size

    Returns:
        int: Power of two
    """
    power = 1
    while power < n:
        power *= 2
    return power


def validate_power_of_two(n, what="matrix dimension"):
    """
    Validate that a dimension is a power of two.

    Args:
        n (int): Dimension to check
        what (str): Name used in the error message

    Returns:
        tuple: (is_valid, error_message)
    """
    if not isinstance(n, int) or n < 1:
        return False, f"{what} must be a positive integer"

    if not is_power_of_two(n):
        return False, f"{what} {n} is not a power of two (use --pad)"

    return True, ""


def validate_positive(value, name, allow_zero=False):
    """
    Validate a numeric field.

    Args:
        value (float): Value to check
        name (str): Field name used in the error message
        allow_zero (bool): Accept zero as well

    Returns:
        tuple: (is_valid, error_message)
    """
    if value is None:
        return False, f"{name} is required"

    try:
        value = float(value)
    except (TypeError, ValueError):
        return False, f"{name} must be numeric"

    if value != value:
        return False, f"{name} must not be NaN"

    if value < 0 or (value == 0 and not allow_zero):
        return False, f"{name} must be positive"

    return True, ""


# ==================== COLOR CODES (for terminal output) ====================

class Colors:
    """ANSI color codes for terminal output."""
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKCYAN = '\033[96m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'


# ==================== INITIALIZATION ====================

if not _known_level:
    log_warning(f"Unknown {LOG_ENV_VAR} value {os.environ.get(LOG_ENV_VAR)!r}, using info")

log_debug(f"GQSVT utilities loaded (log level {logging.getLevelName(_level)})")
