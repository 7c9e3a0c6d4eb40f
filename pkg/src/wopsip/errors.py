"""Exception types shared across the package."""


class WopsipError(Exception):
    """Base class for all package errors."""


class DegenerateSimplex(WopsipError):
    """Simplex volume is below the relative degeneracy threshold."""


class SingularMap(WopsipError):
    """Affine map matrix is (numerically) singular."""


class NonConformal(WopsipError):
    """Mesh has a face shared by more than two cells or a hanging-node pattern."""


class InvalidParameter(WopsipError):
    """Invalid argument to a mesh generator or run configuration."""


class UnsupportedDegree(WopsipError):
    """Requested quadrature degree or dimension is not available."""


class DimensionMismatch(WopsipError):
    """Quadrature rule dimension does not match the integration domain."""


class IndefiniteMatrix(WopsipError):
    """Matrix expected to be positive definite failed a pivot/curvature test."""


class NoConvergence(WopsipError):
    """Iterative solver exceeded its iteration budget."""


class InsufficientLevels(WopsipError):
    """Convergence-rate computation needs at least two refinement levels."""


class BoundaryMismatch(WopsipError):
    """Exact solution does not vanish on the domain boundary."""
