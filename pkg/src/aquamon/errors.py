"""Exception hierarchy shared across the package.

Error class names are part of the operator-facing contract: the station
gateway reports rejected requests as ``{"error": "<ClassName>"}``.
"""


class AquamonError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AquamonError):
    """Invalid or inconsistent configuration."""


class TangentPlaneViolation(AquamonError):
    """Geodetic point too far from the mission origin for the local plane."""


class OutOfWater(AquamonError):
    """Position outside the raster bounds or on a non-navigable cell."""


class TopicError(AquamonError):
    """Malformed topic path or subscription pattern."""


class WaypointError(AquamonError):
    """Base class for waypoint sanitation failures."""


class OutsideGeofence(WaypointError):
    pass


class NotNavigable(WaypointError):
    pass


class DuplicateWaypoint(WaypointError):
    pass


class PlanningError(AquamonError):
    """Base class for path planning failures."""


class NoPath(PlanningError):
    pass


class StartBlocked(PlanningError):
    pass


class GoalBlocked(PlanningError):
    pass


class NoCandidate(PlanningError):
    """No reachable candidate within the travel budget."""


class InsufficientData(AquamonError):
    """Too few observations to train a model."""


class PixelOutOfBounds(AquamonError):
    pass


class DepthOutOfRange(AquamonError):
    pass


class FrameTooLarge(AquamonError):
    """Wire frame exceeds the protocol size limits."""
