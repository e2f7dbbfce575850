"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition or format."""


class DegenerateGraphError(ValidationError):
    """Raised when a graph references a node that no edge touches."""


class DenseCapError(ValidationError):
    """Raised when a dense edge-by-edge materialization would exceed the cap."""


class NumericalError(RuntimeError):
    """Raised when an iterative solver fails to converge or a solve breaks down."""
