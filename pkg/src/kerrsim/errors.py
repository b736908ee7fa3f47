"""Exception types shared across the package."""


class KerrsimError(Exception):
    """Base class for all package errors."""


class TruncationError(KerrsimError):
    """Fock-space cutoff too small for the requested state or drive."""

    def __init__(self, message, suggested_dim=None):
        super().__init__(message)
        self.suggested_dim = suggested_dim


class SolverError(KerrsimError):
    """Linear solve failed or left an unacceptable residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IntegrationError(KerrsimError):
    """Time propagation failed; carries the last successful time."""

    def __init__(self, message, t_last=None):
        super().__init__(message)
        self.t_last = t_last


class UndefinedPhaseError(KerrsimError):
    """Phase statistics requested for a vacuum-dominated state."""


class GridError(KerrsimError):
    """Phase-space grid does not cover the state or is too coarse."""

    def __init__(self, message, suggested_bounds=None):
        super().__init__(message)
        self.suggested_bounds = suggested_bounds


class CalibrationError(KerrsimError):
    """Baseline fit or baseline application failed."""


class BracketingError(KerrsimError):
    """A sweep minimum sits at the grid edge and cannot be refined."""
