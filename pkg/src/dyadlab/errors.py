"""Exception types shared across the package."""


class DyadLabError(Exception):
    """Base class for all package errors."""


class OutOfWindowError(DyadLabError):
    """A generation or interval fell outside the truncated grid window."""


class ResolutionError(DyadLabError):
    """An interval cannot be resolved on the mesh (below cell level or off-mesh)."""


class MeshMismatchError(DyadLabError):
    """Two objects live on different meshes."""


class DegenerateWeightError(DyadLabError):
    """A weight has a zero or negative mass where positivity is required."""


class SingularPointError(DyadLabError):
    """An evaluation point coincides with a kernel singularity."""


class ConvergenceError(DyadLabError):
    """An iterative estimate failed to reach the requested tolerance."""

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class CalibrationError(DyadLabError):
    """A stopping-time calibration constant could not be made to work."""


class InfeasibleError(DyadLabError):
    """A construction was requested with parameters that make it impossible."""


class ConfigError(DyadLabError):
    """Invalid experiment configuration."""
