"""Exception types shared across the package."""


class RtbpError(Exception):
    """Base class for all package errors."""


class ValidationError(RtbpError, ValueError):
    """Invalid input (bad eccentricity, excluded resonance ratio, ...)."""


class CollisionError(RtbpError):
    """A trajectory or track passes through (or too close to) a primary."""


class ConvergenceError(RtbpError):
    """An iterative procedure failed to reach its tolerance."""


class DegenerateCaseError(ValidationError):
    """A chart or formula is evaluated where it is not defined (e=0, G=0, ...)."""
