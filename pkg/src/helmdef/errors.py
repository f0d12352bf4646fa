"""Exception hierarchy shared by all helmdef modules."""


class HelmdefError(Exception):
    """Base class for all errors raised by this package."""


class HierarchyError(HelmdefError):
    """Grid hierarchy cannot be built (point counts not coarsenable)."""


class ModelError(HelmdefError):
    """Invalid velocity or wavenumber model."""


class ShapeError(HelmdefError):
    """Field level or shape does not match the operator or grid."""


class LevelError(HelmdefError):
    """Requested level does not exist in the hierarchy."""


class CapacityError(HelmdefError):
    """Explicit assembly requested beyond the configured size guard."""


class NumericalError(HelmdefError):
    """Non-finite values encountered inside an iterative solver."""


class BreakdownError(HelmdefError):
    """Bi-CGSTAB breakdown (rho or omega vanished).

    Carries the best iterate computed so far in ``x`` and its report in
    ``report``.
    """

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class MgDivergence(HelmdefError):
    """Multigrid cycle increased the residual beyond the divergence guard."""


class ConfigError(HelmdefError):
    """Invalid run configuration or preset name."""


class IoError(HelmdefError):
    """Failure while reading or writing a data file."""
