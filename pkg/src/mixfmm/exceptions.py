"""Exception types raised by the mixfmm library."""


class MixFMMError(ValueError):
    """Base class for all mixfmm errors."""


class GridError(MixFMMError):
    """Raised for invalid time grids (non-increasing, too short, out of range)."""


class DegenerateTargetError(MixFMMError):
    """Raised when a fit target has zero variance."""


class InsufficientDataError(MixFMMError):
    """Raised when there are too few samples or curves for the requested model."""


class MetricError(MixFMMError):
    """Raised when a validity index is undefined for the given partition."""
