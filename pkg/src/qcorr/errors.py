"""Exception hierarchy shared by every module."""


class QcorrError(Exception):
    """Base class for all errors raised by qcorr."""


class DomainError(QcorrError, ValueError):
    """An argument is outside the domain of an operation (bad index, shape, size)."""


class UnsatisfiableError(DomainError):
    """No unital *-homomorphism with the requested shape exists."""


class PreconditionError(QcorrError, ValueError):
    """An input is well formed but fails a mathematical precondition.

    ``residual`` carries the measured violation when one is available.
    """

    def __init__(self, message, residual=None, witness=None):
        super().__init__(message)
        self.residual = residual
        self.witness = witness


class UnsupportedInputError(QcorrError, TypeError):
    """The operation is not defined for this kind of input."""


class RankError(QcorrError, ArithmeticError):
    """A dimension identity failed, which points at a numerical rank decision."""

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class InternalConsistencyError(QcorrError, RuntimeError):
    """Two independent computations of the same quantity disagree."""
