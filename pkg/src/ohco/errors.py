"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end.
"""


class OhcoError(Exception):
    exit_code = 1


class ConfigError(OhcoError):
    """Invalid configuration. ``errors`` holds every problem found, not just the first."""

    exit_code = 2

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class GalleryError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class HorizonTooSmall(ValidationError):
    def __init__(self, message, min_horizon):
        self.min_horizon = min_horizon
        super().__init__(message)


class SizingError(ValidationError):
    pass


class NumericError(OhcoError):
    """Solver failure or non-finite state. ``residual`` is attached when known."""

    exit_code = 3

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class DomainError(NumericError, ValueError):
    pass


class BoundaryError(DomainError):
    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class FeasibilityError(NumericError):
    pass


class OracleInconsistency(NumericError):
    pass


class DiagnosticsUnavailable(OhcoError):
    pass


class CertificateError(OhcoError):
    exit_code = 4


class CompatibilityError(CertificateError):
    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class TrajectoryEscape(CertificateError):
    def __init__(self, message, round_index):
        self.round_index = round_index
        super().__init__(message)


class OutputError(OhcoError):
    exit_code = 5
