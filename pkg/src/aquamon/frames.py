"""Geodetic and rigid-body coordinate machinery.

Conventions used throughout the package:

* Global positions are WGS84 latitude/longitude in degrees.
* Local positions are east/north meters on an equirectangular tangent
  plane anchored at a fixed mission origin (constant 111 320 m/degree;
  sub-decimeter error over a lake a few kilometers across).
* The vehicle body frame is x-forward, y-left, z-up.
* Heading is yaw in radians, counterclockwise from east, normalized to
  (-pi, pi].  Attitude composes in Z-Y-X intrinsic order (yaw, then
  pitch, then roll).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TangentPlaneViolation

METERS_PER_DEGREE = 111_320.0

# Maximum geodetic delta accepted by the tangent-plane projection.
MAX_DELTA_DEG = 1.0

# Tangent-plane validity guard on local coordinates.
MAX_ENU_M = 100_000.0


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi].  Idempotent."""
    a = math.remainder(a, math.tau)
    if a <= -math.pi:
        a += math.tau
    return a


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 position in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("GeoPoint coordinates must be finite")
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class EnuPoint:
    """Local tangent-plane position in meters (east, north)."""

    east: float
    north: float

    def __post_init__(self):
        if not (math.isfinite(self.east) and math.isfinite(self.north)):
            raise ValueError("EnuPoint coordinates must be finite")
        if abs(self.east) >= MAX_ENU_M or abs(self.north) >= MAX_ENU_M:
            raise ValueError("EnuPoint outside tangent-plane validity range")

    def distance_to(self, other: "EnuPoint") -> float:
        return math.hypot(self.east - other.east, self.north - other.north)


@dataclass(frozen=True)
class Pose:
    """Full planar vehicle pose: position, attitude and body velocities."""

    position: EnuPoint
    heading: float = 0.0  # rad, CCW from east, in (-pi, pi]
    pitch: float = 0.0
    roll: float = 0.0
    surge_speed: float = 0.0  # m/s along body x
    yaw_rate: float = 0.0  # rad/s

    def __post_init__(self):
        for name in ("heading", "pitch", "roll", "surge_speed", "yaw_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Pose.{name} must be finite")
        object.__setattr__(self, "heading", wrap_angle(self.heading))


def geo_to_enu(origin: GeoPoint, p: GeoPoint) -> EnuPoint:
    """Project a geodetic point onto the local plane about ``origin``.

    Raises TangentPlaneViolation when the point is a degree or more away
    from the origin in either axis.
    """
    dlat = p.lat - origin.lat
    dlon = p.lon - origin.lon
    if abs(dlat) >= MAX_DELTA_DEG or abs(dlon) >= MAX_DELTA_DEG:
        raise TangentPlaneViolation(
            f"delta ({dlat:.4f}, {dlon:.4f}) deg exceeds tangent-plane range"
        )
    north = dlat * METERS_PER_DEGREE
    east = dlon * METERS_PER_DEGREE * math.cos(math.radians(origin.lat))
    return EnuPoint(east=east, north=north)


def enu_to_geo(origin: GeoPoint, p: EnuPoint) -> GeoPoint:
    """Exact algebraic inverse of :func:`geo_to_enu`.

    Raises TangentPlaneViolation when the meter offsets convert to a
    degree or more in either axis, mirroring the forward projection.
    """
    dlat = p.north / METERS_PER_DEGREE
    dlon = p.east / (METERS_PER_DEGREE * math.cos(math.radians(origin.lat)))
    if abs(dlat) >= MAX_DELTA_DEG or abs(dlon) >= MAX_DELTA_DEG:
        raise TangentPlaneViolation(
            f"delta ({dlat:.4f}, {dlon:.4f}) deg exceeds tangent-plane range"
        )
    return GeoPoint(lat=origin.lat + dlat, lon=origin.lon + dlon)


def rotation_body_to_enu(heading: float, pitch: float, roll: float) -> np.ndarray:
    """Body-to-world rotation matrix, Z-Y-X intrinsic (yaw, pitch, roll).

    World axes are (east, north, up); body axes are (forward, left, up).
    """
    ch, sh = math.cos(heading), math.sin(heading)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    rz = np.array([[ch, -sh, 0.0], [sh, ch, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def body_to_enu(pose: Pose, v) -> tuple[EnuPoint, float]:
    """Map a body-frame vector (meters) to world coordinates.

    Returns the horizontal position as an EnuPoint plus the vertical
    offset in meters (positive up) relative to the pose's own height.
    """
    vec = np.asarray(v, dtype=float)
    if vec.shape != (3,):
        raise ValueError("body vector must have exactly 3 components")
    rot = rotation_body_to_enu(pose.heading, pose.pitch, pose.roll)
    world = rot @ vec
    return (
        EnuPoint(
            east=pose.position.east + world[0],
            north=pose.position.north + world[1],
        ),
        float(world[2]),
    )
