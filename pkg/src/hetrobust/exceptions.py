"""Exception hierarchy shared by every module."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class EmptySelectionError(DomainError):
    """A threshold selected no samples."""


class SingularDesignError(DomainError):
    """A regression design matrix is rank deficient."""


class InfeasibleCorruptionRate(DomainError):
    """The corruption rate is too small for the requested adversary."""
