"""Exception types shared across the package."""


class SurfVortexError(Exception):
    """Base class for all package errors."""


class ChartDomainError(SurfVortexError):
    """A chart was evaluated outside its domain (e.g. projection pole)."""


class SingularityError(SurfVortexError):
    """Evaluation at or too close to a logarithmic singularity."""


class MetricError(SurfVortexError):
    """Invalid conformal factor (non-positive, bad table, failed map)."""


class CollisionError(SurfVortexError):
    """Two vortices violated the collision guard during integration."""

    def __init__(self, message, pair=None, time=None):
        super().__init__(message)
        self.pair = pair
        self.time = time


class ShootingError(SurfVortexError):
    """Geodesic boundary-value solve failed to converge."""


class ConfigError(SurfVortexError):
    """Scenario configuration is malformed or fails validation."""
