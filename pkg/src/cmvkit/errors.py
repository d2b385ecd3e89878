"""Exception types shared by the cmvkit modules."""


class CMVError(Exception):
    """Base class for all cmvkit errors."""


class DomainError(CMVError, ValueError):
    """A numerical argument lies outside the domain of an operation.

    ``index`` is the 1-based Schur-parameter index at fault, when there is one.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UsageError(CMVError, ValueError):
    """An operation was called with an inconsistent combination of arguments."""


class ConvergenceError(CMVError, RuntimeError):
    """An iterative procedure did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ReducibleError(CMVError, ValueError):
    """A matrix that must be irreducible has a (numerically) vanishing coupling."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TrackingError(CMVError, RuntimeError):
    """A mass-point track could not be continued."""
