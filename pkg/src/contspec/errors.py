"""Exception types shared across the package."""


class InvalidState(ValueError):
    """A state or observable violates a structural invariant (e.g. non-Hermitian block)."""


class InfeasibleTarget(ValueError):
    """A requested moment cannot be produced by any density on the grid."""


class SolverFailure(RuntimeError):
    """An iterative solve did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainTooSmall(ValueError):
    """A phase-space weight carries non-negligible mass at the grid boundary."""
