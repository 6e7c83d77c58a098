"""Exception types shared across the package."""


class SandwichPostError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(SandwichPostError, ValueError):
    """Operand shapes are incompatible."""


class NotPositiveDefinite(SandwichPostError, ValueError):
    """A matrix required to be positive definite failed its pivot test."""


class DofTooSmall(SandwichPostError, ValueError):
    """Wishart degrees of freedom below the matrix dimension."""


class EmptyInput(SandwichPostError, ValueError):
    """An operation that needs at least one element received none."""


class SingularDesign(SandwichPostError, ValueError):
    """Design matrix is rank deficient (collinear covariates or n < p)."""


class MomentOnBoundary(SandwichPostError, RuntimeError):
    """Target moments sit on the boundary of the achievable set; the
    moment-matching parameter diverges."""


class NoConvergence(SandwichPostError, RuntimeError):
    """Iterative solver exhausted its iteration budget."""


class ReplicateFailure(SandwichPostError, RuntimeError):
    """A simulation replicate raised; carries the cell label and index."""

    def __init__(self, cell: str, replicate: int, cause: Exception):
        self.cell = cell
        self.replicate = replicate
        self.cause = cause
        super().__init__(f"replicate {replicate} of cell {cell} failed: {cause}")
