"""Exception types shared across the library."""


class LocalSPDEError(Exception):
    """Base class for all library errors."""


class NonElliptic(LocalSPDEError):
    """The second-order symbol is not positive definite for the given parameter."""


class FactorizationFailure(LocalSPDEError):
    """A covariance matrix stayed numerically indefinite beyond the jitter budget."""


class NotDissipative(LocalSPDEError):
    """The drift matrix admits no positive semidefinite stationary covariance."""


class SupportViolation(LocalSPDEError):
    """A scaled kernel's support is not contained in the domain."""


class Infeasible(LocalSPDEError):
    """The requested measurement layout cannot be packed into the domain."""


class NotSelfAdjoint(LocalSPDEError):
    """Operation requires a self-adjoint operator (no transport term)."""


class SingularInformation(LocalSPDEError):
    """Observed Fisher information exceeds the configured condition-number cap."""


class Divergent(LocalSPDEError):
    """The asymptotic covariance integral is not integrable for this operator pair."""


class SingularGram(LocalSPDEError):
    """The Gram matrix of the measurement functions is singular."""


class Degenerate(LocalSPDEError):
    """A covariance operator has (numerically) vanishing eigenvalues."""


class InvalidRegimeWarning(UserWarning):
    """Statistic computed outside the regime in which its calibration is valid."""
