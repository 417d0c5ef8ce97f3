"""Exception hierarchy shared by all engines."""


class EntrofluxError(Exception):
    """Base class for all library errors."""


class InputError(EntrofluxError, ValueError):
    """Malformed or out-of-range input."""


class PhysicalityError(EntrofluxError, ValueError):
    """A covariance matrix or density matrix violates the uncertainty principle / positivity."""


class TruncationError(EntrofluxError):
    """Fock truncation budget exceeded."""


class ConditioningError(EntrofluxError):
    """Eigenvalue clipping before a matrix logarithm moved the trace too far."""


class IntegrationError(EntrofluxError):
    """State invariants broke during time integration."""

    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time:.6g})")
        self.time = time


class DegeneracyError(EntrofluxError):
    """Generator kernel is not one-dimensional."""

    def __init__(self, message, kernel_dim):
        super().__init__(f"{message}: kernel dimension {kernel_dim}")
        self.kernel_dim = kernel_dim


class SemanticsError(EntrofluxError):
    """A quantity was requested where it has no physical meaning."""


class RecurrenceError(EntrofluxError):
    """Simulation horizon reaches the Poincare recurrence of a discretized bath."""
