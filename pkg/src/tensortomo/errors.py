"""Exception types shared across the package."""


class TensorTomoError(Exception):
    """Base class for all package errors."""


class InputDomainError(TensorTomoError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GridError(TensorTomoError, ValueError):
    """A grid is too coarse, non-uniform, or otherwise unusable."""


class DegenerateIsochroneError(InputDomainError):
    """ct <= 2d: the isochrone collapses to the focal segment."""


class SingularConfigurationError(TensorTomoError):
    """The bistatic angle reaches pi somewhere on the integration path."""


class BandlimitError(InputDomainError):
    """An angular profile exceeds its claimed bandlimit.

    Carries the relative Fourier-tail energy in ``residual``.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class OutOfSceneError(InputDomainError):
    """An isochrone does not intersect the scene ball."""


class PaddingError(GridError):
    """Field support too close to the grid boundary for a periodic solve."""


class InconsistentDataError(TensorTomoError):
    """Sinogram data violates a compact-support consistency condition.

    Carries the boundary residual in ``residual``.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class ConfigError(TensorTomoError, ValueError):
    """Invalid or incomplete run configuration."""
