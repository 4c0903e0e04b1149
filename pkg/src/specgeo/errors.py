"""Custom exceptions for specgeo operations.

Provides specific exception types for the different ways an experiment can
fail, so callers (the experiment runner in particular) can record a failure
per row and keep going.
"""


class SpecGeoError(Exception):
    """Base exception for all specgeo errors."""


class ConfigError(SpecGeoError):
    """Raised when an experiment configuration is invalid.

    Examples: unknown key, missing physics parameter, value outside the
    preconditions of the dispatched operation.
    """

    def __init__(self, key: str, *args: object) -> None:
        """Initialize the exception with the offending configuration key.

        Args:
            key: Dotted path of the configuration key that failed validation.
            *args: Additional arguments passed to the base Exception class.
        """
        super().__init__(*args)
        self.key = key


class DomainError(SpecGeoError):
    """Raised when an operation is called outside its preconditions.

    Examples: zero frequency vector, l = 0 zonal harmonic, t grid beyond T0.
    """


class RegionError(DomainError):
    """Raised when a region is degenerate or exceeds the injectivity bound."""


class DegenerateFieldError(SpecGeoError):
    """Raised when a field is numerically trivial where it must not be.

    Examples: gradient norm below 1e-14 on a ball, identically zero test
    function in a Carleman evaluation.
    """


class UnsupportedFamilyError(SpecGeoError):
    """Raised when an operation is unavailable for a surface or eigen-family.

    Examples: complexification of a Sturm–Liouville eigenfunction, the
    eigenvector system residual on a curved chart.
    """


class ConvergenceError(SpecGeoError):
    """Raised when an iteration or extrapolation fails to converge."""


class ReportError(SpecGeoError):
    """Raised when experiment outputs cannot be written."""

    def __init__(self, path: str, *args: object) -> None:
        """Initialize the exception with the failing path.

        Args:
            path: Filesystem path the write was attempted on.
            *args: Additional arguments passed to the base Exception class.
        """
        super().__init__(*args)
        self.path = path
