"""Exception hierarchy shared by the shooting toolkit."""


class ShootingError(Exception):
    """Base class for every error raised by :mod:`lamshoot`."""


class DomainError(ShootingError, ValueError):
    """An argument lies outside the domain of the operation (r <= 0, delta <= 0, ...)."""


class ConfigurationError(ShootingError, ValueError):
    """Invalid integrator controls or run configuration."""


class InsufficientDataError(ShootingError):
    """Too few samples on an arc to form finite differences."""


class NoBracketError(ShootingError):
    """The seed sweep found no label change to bisect on.

    ``rows`` carries the sweep so callers can report it.
    """

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = list(rows)


class PrecisionLimitError(ShootingError):
    """Bisection blocked by an unresolvable classification."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DistinctRootsError(ShootingError):
    """The two torus parameters collapsed onto each other."""

    def __init__(self, message, results=()):
        super().__init__(message)
        self.results = tuple(results)


class NotClosableError(ShootingError):
    """A trajectory does not end on the symmetry axis with theta = pi."""

    def __init__(self, message, x_end=None, theta_defect=None):
        super().__init__(message)
        self.x_end = x_end
        self.theta_defect = theta_defect


class UnsupportedDimensionError(ShootingError):
    """Mesh export only exists for surfaces in three-space (n = 2)."""
