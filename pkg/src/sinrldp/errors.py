"""Exception types shared across the package."""


class SinrError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(SinrError):
    """Requested simulation exceeds the resource guard."""


class SingularityError(SinrError):
    """Coincident points evaluated under an unbounded path loss."""


class ModeError(SinrError):
    """Operation invoked in an unsupported configuration."""


class QuadratureError(SinrError):
    """Quadrature integrand was non-finite at a node."""


class CalibrationError(SinrError):
    """Threshold calibration failed (root find or degenerate nulls)."""


class GridMismatchError(SinrError):
    """Measures defined on different bin grids were combined."""


class DegenerateProbabilityError(SinrError):
    """A realized pair has edge probability 0 or 1."""


class SerializationError(SinrError):
    """Object cannot be written in the file format."""


class RealizationFormatError(SinrError):
    """Realization file is corrupt, truncated, or unsupported."""
