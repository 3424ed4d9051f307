"""Failure vocabulary used across the package.

Each class marks a distinct contract violation so callers and tests can
react to the kind, not the message text.
"""


class EquilocError(Exception):
    """Base class for all package-specific failures."""


class PreconditionError(EquilocError, ValueError):
    """Input violates an operation's stated precondition."""


class CapabilityError(EquilocError, NotImplementedError):
    """Request is well-formed but outside the implemented scope."""


class ResolutionError(EquilocError, ValueError):
    """Quadrature resolution too coarse for the requested oscillation."""


class DomainError(EquilocError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class WallError(EquilocError, ValueError):
    """Evaluation direction lies on a wall of non-smoothness."""


class ConeError(EquilocError, ValueError):
    """Declared cone touches a forbidden hyperplane."""


class HyperplaneError(EquilocError, ZeroDivisionError):
    """Evaluation point lies on a weight hyperplane."""


class UnsupportedModelError(EquilocError, NotImplementedError):
    """Model family outside the implemented chart catalogue."""


class InternalConsistencyError(EquilocError, RuntimeError):
    """A structural invariant failed mid-computation."""


class DataError(EquilocError, ValueError):
    """Supplied table or file content is unusable."""


class ShapeError(EquilocError, ValueError):
    """Array or block dimensions do not line up."""
