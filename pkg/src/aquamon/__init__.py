"""Desk-scale lake monitoring stack: simulated catamaran, field mapping,
mission logic, telemetry link and shore-station tools."""

from .errors import (
    AquamonError,
    ConfigError,
    DepthOutOfRange,
    DuplicateWaypoint,
    FrameTooLarge,
    GoalBlocked,
    InsufficientData,
    NoCandidate,
    NoPath,
    NotNavigable,
    OutOfWater,
    OutsideGeofence,
    PixelOutOfBounds,
    PlanningError,
    StartBlocked,
    TangentPlaneViolation,
    TopicError,
    WaypointError,
)
from .frames import EnuPoint, GeoPoint, Pose, enu_to_geo, geo_to_enu
from .gp import GpFieldEstimator, compliance
from .rasters import (
    NODATA,
    OccupancyGrid,
    ScalarField,
    read_ascii_grid,
    write_ascii_grid,
)
from .world import WorldSpec, generate_world

__version__ = "0.1.0"

__all__ = [
    "AquamonError",
    "ConfigError",
    "DepthOutOfRange",
    "DuplicateWaypoint",
    "EnuPoint",
    "FrameTooLarge",
    "GeoPoint",
    "GoalBlocked",
    "GpFieldEstimator",
    "InsufficientData",
    "NoCandidate",
    "NoPath",
    "NotNavigable",
    "NODATA",
    "OccupancyGrid",
    "OutOfWater",
    "OutsideGeofence",
    "PixelOutOfBounds",
    "PlanningError",
    "Pose",
    "ScalarField",
    "StartBlocked",
    "TangentPlaneViolation",
    "TopicError",
    "WaypointError",
    "WorldSpec",
    "compliance",
    "enu_to_geo",
    "generate_world",
    "geo_to_enu",
    "read_ascii_grid",
    "write_ascii_grid",
    "__version__",
]
