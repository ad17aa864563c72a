"""Exception types shared across the package."""


class ThinPipeError(Exception):
    """Base class for all package errors."""


class GeometryError(ThinPipeError):
    """Invalid pipe geometry (self-intersection, bad curve data, ...)."""


class SolverError(ThinPipeError):
    """A linear or nonlinear solve failed to converge."""


class ConfigError(ThinPipeError):
    """Run configuration file is missing, malformed, or inconsistent."""
