"""
Error Types
Exceptions raised by the simulator and solver packages. The command line layer is the only
place that catches them and turns them into exit statuses.
"""

from shared.utils import (
    EXIT_FAILURE, EXIT_BREAKDOWN, EXIT_INPUT_ERROR
)


class GqsvtError(Exception):
    """Base class for every error raised by this project."""

    exit_status = EXIT_FAILURE


# ==================== POLYNOMIAL / PHASE ERRORS ====================

class CapacityError(GqsvtError):
    """Polynomial degree or problem size beyond the supported limits."""
    exit_status = EXIT_INPUT_ERROR


class DomainError(GqsvtError):
    """Target polynomial exceeds modulus one on the unit circle."""
    exit_status = EXIT_INPUT_ERROR


class FactorizationError(GqsvtError):
    """Complementary polynomial could not be factored accurately."""


class PeelConsistencyError(GqsvtError):
    """
    Layer peeling produced a non-vanishing constant term.

    Attributes:
        step (int): Degree at which peeling failed
        partial (dict): Angles recovered so far (theta, phi keyed by index)
    """

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial or {}


class SynthesisError(GqsvtError):
    """Neither peeling nor the least-squares fallback met the reconstruction tolerance."""


class ArityError(GqsvtError):
    """Phase vector length does not match the program degree."""


# ==================== ENCODING ERRORS ====================

class ScaleError(GqsvtError):
    """Scale alpha smaller than the spectral norm of A."""
    exit_status = EXIT_INPUT_ERROR


class ShapeError(GqsvtError):
    """Dimension is not a power of two, or registers do not line up."""
    exit_status = EXIT_INPUT_ERROR


class QubitizationError(GqsvtError):
    """Direct-sum rebuild of the walk operator does not match."""


class ConstructionError(GqsvtError):
    """A controlled operator does not act on its eigenvectors as required."""


# ==================== SOLVER ERRORS ====================

class BreakdownError(GqsvtError):
    """
    BiCG or Lanczos breakdown.

    Attributes:
        iteration (int): Iteration index at which the breakdown occurred
    """
    exit_status = EXIT_BREAKDOWN

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InapplicableBoundError(GqsvtError):
    """Convergence bound assumptions fail (spectrum not in the right half-plane, zero pivot)."""


class AccountingError(GqsvtError):
    """Depth bookkeeping disagrees with the assembled programs."""


# ==================== INPUT / OUTPUT ERRORS ====================

class InputError(GqsvtError):
    """
    Malformed matrix, vector, polynomial or configuration.

    Attributes:
        line (int): 1-based line number in the offending file, if known
    """
    exit_status = EXIT_INPUT_ERROR

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class ReportIOError(GqsvtError):
    """Report files could not be written."""


def exit_status_for(error):
    """
    Map an exception to the documented process exit status.

    Args:
        error (BaseException): Raised exception

    Returns:
        int: Exit status
    """
    if isinstance(error, GqsvtError):
        return error.exit_status
    return EXIT_FAILURE
