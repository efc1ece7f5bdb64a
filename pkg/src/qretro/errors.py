"""Exception and warning types raised across the package."""


class QRetroError(Exception):
    """Base class for all package errors."""


class NonPhysicalOperator(QRetroError, ValueError):
    """Operator fails a Hermiticity, positivity or trace check."""


class SingularMixture(QRetroError, ValueError):
    """The unread probe mixture is (numerically) singular."""


class ZeroTraceElement(QRetroError, ValueError):
    """POVM element has no trace, so retrodiction is undefined."""


class IncompletePovm(QRetroError, ValueError):
    """POVM elements do not sum to the identity."""


class NotMaximallyMixed(QRetroError, ValueError):
    """Preparation mixture is not proportional to the identity."""


class UnreachableOutcome(QRetroError, ValueError):
    """An outcome has zero total probability over all preparations."""


class ZeroSuccessProbability(QRetroError, ValueError):
    """Heralding outcome has zero probability on the resource."""


class TruncationLeakage(QRetroError, ValueError):
    """State weight outside the truncated Fock space is too large."""


class QuadratureUnderresolved(QRetroError, RuntimeError):
    """Gauss-Hermite quadrature did not converge."""


class SeriesNotConverged(QRetroError, ValueError):
    """Laguerre series remainder bound is above tolerance."""


class NoConvergence(QRetroError, RuntimeError):
    """Iterative reconstruction hit its iteration limit.

    The partially converged result is kept on ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class TruncationWarning(UserWarning):
    """Coherent amplitude too large for the Fock truncation."""
