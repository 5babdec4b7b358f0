"""Camera geometry: from detector output to globally referenced points.

The detector itself is abstracted behind Detection; a synthetic stand-in
projects known floating-debris positions through the same camera model
with configurable noise, so the georeferencing chain can be validated
end to end without any imagery.

Camera frame: Z along the optical axis (forward), X right, Y down.
Body frame: x forward, y left, z up.  A forward-looking camera with no
mounting rotation therefore maps camera Z to body x, camera X to body
-y, camera Y to body -z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DepthOutOfRange, PixelOutOfBounds
from .frames import EnuPoint, GeoPoint, Pose, body_to_enu, enu_to_geo, rotation_body_to_enu
from .rasters import OccupancyGrid

DEPTH_MIN = 0.3
DEPTH_MAX = 40.0
DEFAULT_DETECTOR_RANGE = 25.0

# camera axes expressed in the body frame (zero mounting rotation)
_CAM_TO_BODY = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        try:
            return cls(**known)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"camera intrinsics: {exc}") from exc


@dataclass(frozen=True)
class CameraExtrinsics:
    """Camera origin in the body frame plus mounting rotation."""

    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        vals = (*self.translation, self.yaw, self.pitch, self.roll)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("extrinsics must be finite")

    @classmethod
    def from_dict(cls, d: dict) -> "CameraExtrinsics":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        try:
            if "translation" in known:
                known["translation"] = tuple(float(x) for x in known["translation"])
            return cls(**known)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"camera extrinsics: {exc}") from exc


@dataclass(frozen=True)
class Detection:
    bbox: tuple[float, float, float, float]
    confidence: float
    depth_m: float
    cls: str = "macro_plastic"

    def __post_init__(self):
        u0, v0, u1, v1 = self.bbox
        if not (0 <= u0 < u1 and 0 <= v0 < v1):
            raise ValueError("bbox corners must be ordered and non-negative")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be within [0, 1]")
        if not DEPTH_MIN < self.depth_m <= DEPTH_MAX:
            raise DepthOutOfRange(
                f"depth {self.depth_m} m outside ({DEPTH_MIN}, {DEPTH_MAX}]"
            )

    def validate_for(self, intr: CameraIntrinsics) -> None:
        u0, v0, u1, v1 = self.bbox
        if u1 > intr.width or v1 > intr.height:
            raise PixelOutOfBounds("bbox exceeds image bounds")

    @property
    def center(self) -> tuple[float, float]:
        u0, v0, u1, v1 = self.bbox
        return (u0 + u1) / 2.0, (v0 + v1) / 2.0


def pixel_to_camera(
    intr: CameraIntrinsics, u: float, v: float, depth_m: float
) -> np.ndarray:
    """Back-project a pixel at a known optical-axis depth to camera XYZ."""
    if not (0.0 <= u <= intr.width and 0.0 <= v <= intr.height):
        raise PixelOutOfBounds(f"pixel ({u}, {v}) outside image")
    if not DEPTH_MIN < depth_m <= DEPTH_MAX:
        raise DepthOutOfRange(f"depth {depth_m} m outside ({DEPTH_MIN}, {DEPTH_MAX}]")
    return np.array(
        [
            (u - intr.cx) * depth_m / intr.fx,
            (v - intr.cy) * depth_m / intr.fy,
            depth_m,
        ]
    )


def mounting_rotation(extr: CameraExtrinsics) -> np.ndarray:
    """Full camera-to-body rotation including the axis remap."""
    return rotation_body_to_enu(extr.yaw, extr.pitch, extr.roll) @ _CAM_TO_BODY


def camera_to_body(extr: CameraExtrinsics, v_cam: np.ndarray) -> np.ndarray:
    return mounting_rotation(extr) @ np.asarray(v_cam, dtype=float) + np.array(
        extr.translation
    )


def georeference(
    det: Detection,
    intr: CameraIntrinsics,
    extr: CameraExtrinsics,
    pose: Pose,
    origin: GeoPoint,
) -> GeoPoint:
    """Locate a detection on the water surface in geographic coordinates.

    Ranges the bbox center, lifts it through camera, body and local
    tangent frames, then discards the vertical component since the
    targets float.
    """
    det.validate_for(intr)
    u, v = det.center
    v_cam = pixel_to_camera(intr, u, v, det.depth_m)
    v_body = camera_to_body(extr, v_cam)
    horiz, _ = body_to_enu(pose, v_body)
    return enu_to_geo(origin, horiz)


def _line_of_sight(grid: OccupancyGrid, a: EnuPoint, b: EnuPoint) -> bool:
    """Coarse ray march: false when land sits between the two points."""
    dist = a.distance_to(b)
    if dist == 0.0:
        return True
    steps = max(2, int(math.ceil(dist / (grid.cell_size * 0.5))))
    for i in range(1, steps):
        t = i / steps
        p = EnuPoint(a.east + t * (b.east - a.east), a.north + t * (b.north - a.north))
        if grid.contains(p) and not grid.is_navigable(p):
            return False
    return True


def synthetic_detector(
    debris: list[EnuPoint],
    pose: Pose,
    intr: CameraIntrinsics,
    extr: CameraExtrinsics,
    rng: np.random.Generator,
    grid: OccupancyGrid | None = None,
    max_range: float = DEFAULT_DETECTOR_RANGE,
    pixel_noise_sd: float = 2.0,
    depth_noise_frac: float = 0.01,
    conf_mean: float = 0.85,
    conf_sd: float = 0.08,
    target_radius: float = 0.15,
) -> list[Detection]:
    """Project known debris positions into noisy detections.

    Items outside the field of view, beyond max_range, or screened by
    land are omitted.  Box size comes from the apparent target radius;
    boxes that would spill past the image edge are dropped rather than
    clipped.
    """
    R_pose = rotation_body_to_enu(pose.heading, pose.pitch, pose.roll)
    R_cam = mounting_rotation(extr)
    t_cam = np.array(extr.translation)
    out: list[Detection] = []
    for item in debris:
        d_enu = np.array(
            [item.east - pose.position.east, item.north - pose.position.north, 0.0]
        )
        v_body = R_pose.T @ d_enu
        v_cam = R_cam.T @ (v_body - t_cam)
        depth = float(v_cam[2])
        if not DEPTH_MIN < depth <= max_range:
            continue
        u = intr.cx + intr.fx * v_cam[0] / depth
        v = intr.cy + intr.fy * v_cam[1] / depth
        if not (0 <= u <= intr.width and 0 <= v <= intr.height):
            continue
        if grid is not None and not _line_of_sight(grid, pose.position, item):
            continue
        u_n = u + rng.normal(0.0, pixel_noise_sd)
        v_n = v + rng.normal(0.0, pixel_noise_sd)
        depth_n = depth * (1.0 + rng.normal(0.0, depth_noise_frac))
        depth_n = min(max(depth_n, DEPTH_MIN * 1.001), DEPTH_MAX)
        conf = float(np.clip(rng.normal(conf_mean, conf_sd), 0.05, 0.99))
        hu = min(max(intr.fx * target_radius / depth, 3.0), 40.0)
        hv = min(max(intr.fy * target_radius / depth, 3.0), 40.0)
        bbox = (u_n - hu, v_n - hv, u_n + hu, v_n + hv)
        if bbox[0] < 0 or bbox[1] < 0 or bbox[2] > intr.width or bbox[3] > intr.height:
            continue
        out.append(Detection(bbox=bbox, confidence=conf, depth_m=depth_n))
    return out
