"""Synthetic lake world: navigability raster, ground-truth fields, sensors.

The lake is an ellipse with a seeded boundary wobble.  Ground-truth
scalar fields are sums of Gaussian bumps with a configurable spatial
scale, affinely mapped into each parameter's configured range, and
masked to NODATA outside navigable water.  Sensor reads interpolate the
truth bilinearly and add Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError, OutOfWater
from .frames import EnuPoint, Pose
from .rasters import (
    ALL_PARAMETERS,
    PARAMETER_UNITS,
    WQP_PARAMETERS,
    OccupancyGrid,
    ScalarField,
)

SONAR_MIN_DEPTH = 0.3  # echosounder blanking distance
SONAR_MAX_DEPTH = 100.0


@dataclass(frozen=True)
class Sample:
    """One timestamped, georeferenced sensor reading."""

    time: float
    position: EnuPoint
    parameter: str
    value: float
    noise_sd: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("sample value must be finite")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


@dataclass
class ParameterSpec:
    low: float
    high: float
    noise_sd: float
    units: str = ""

    def __post_init__(self):
        if not (self.low <= self.high):
            raise ConfigError(f"parameter range [{self.low}, {self.high}] inverted")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")


# Per-parameter defaults; the paper's instruments publish no error model,
# so the noise figures are package defaults and config-overridable.
DEFAULT_PARAMETERS = {
    "depth": ParameterSpec(0.5, 12.0, 0.05, "m"),
    "ph": ParameterSpec(6.8, 9.2, 0.05, "pH"),
    "temperature": ParameterSpec(12.0, 24.0, 0.1, "degC"),
    "conductivity": ParameterSpec(0.6, 1.8, 0.02, "mS/cm"),
    "turbidity": ParameterSpec(2.0, 18.0, 0.5, "NTU"),
}


@dataclass
class WorldSpec:
    width_m: float = 900.0
    height_m: float = 700.0
    cell_size_m: float = 5.0
    origin_east: float = 0.0
    origin_north: float = 0.0
    lengthscale_m: float = 80.0
    n_bumps: int = 12
    shore_margin_m: float = 25.0
    boundary_wobble: float = 0.06
    n_debris: int = 5
    parameters: dict = dc_field(default_factory=lambda: dict(DEFAULT_PARAMETERS))

    def __post_init__(self):
        if self.cell_size_m <= 0:
            raise ConfigError("cell_size_m must be positive")
        if self.width_m < 3 * self.cell_size_m or self.height_m < 3 * self.cell_size_m:
            raise ConfigError("world extent too small for its cell size")
        if self.lengthscale_m <= 0:
            raise ConfigError("lengthscale_m must be positive")
        if self.n_bumps < 1:
            raise ConfigError("n_bumps must be >= 1")
        if self.n_debris < 0:
            raise ConfigError("n_debris must be >= 0")
        for name in self.parameters:
            if name not in ALL_PARAMETERS:
                raise ConfigError(f"unknown parameter {name!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        d = dict(d)
        params = {}
        try:
            for name, p in d.pop("parameters", {}).items():
                lo, hi = p["range"]
                params[name] = ParameterSpec(
                    low=float(lo),
                    high=float(hi),
                    noise_sd=float(p.get("noise_sd", 0.0)),
                    units=p.get("units", PARAMETER_UNITS.get(name, "")),
                )
            if not params:
                params = dict(DEFAULT_PARAMETERS)
            return cls(parameters=params, **d)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad world spec: {e}") from None


@dataclass
class World:
    grid: OccupancyGrid
    fields: dict[str, ScalarField]
    debris: list[EnuPoint]
    spec: WorldSpec

    def truth(self, parameter: str, p: EnuPoint) -> float:
        return sample_field(self.fields[parameter], p)


def _cell_centers(spec: WorldSpec) -> tuple[np.ndarray, np.ndarray, int, int]:
    width = int(round(spec.width_m / spec.cell_size_m))
    height = int(round(spec.height_m / spec.cell_size_m))
    cs = spec.cell_size_m
    xs = spec.origin_east + (np.arange(width) + 0.5) * cs
    ys = spec.origin_north + (np.arange(height) + 0.5) * cs
    ex, ny = np.meshgrid(xs, ys)  # shape (height, width)
    return ex, ny, width, height


def _lake_mask(spec: WorldSpec, rng: np.random.Generator) -> np.ndarray:
    ex, ny, _, _ = _cell_centers(spec)
    cx = spec.origin_east + spec.width_m / 2.0
    cy = spec.origin_north + spec.height_m / 2.0
    semi_e = spec.width_m / 2.0 - spec.shore_margin_m
    semi_n = spec.height_m / 2.0 - spec.shore_margin_m
    if semi_e <= 0 or semi_n <= 0:
        raise ConfigError("shore_margin_m leaves no open water")
    rho = np.hypot((ex - cx) / semi_e, (ny - cy) / semi_n)
    theta = np.arctan2(ny - cy, ex - cx)
    ph1, ph2 = rng.uniform(0, 2 * np.pi, size=2)
    a1, a2 = rng.uniform(0.4, 1.0, size=2)
    limit = 1.0 + spec.boundary_wobble * (
        a1 * np.sin(3 * theta + ph1) + a2 * np.sin(5 * theta + ph2)
    )
    mask = rho < limit
    if not mask.any():
        raise ConfigError("generated lake has no navigable cells")
    return mask


def _bump_field(
    spec: WorldSpec, rng: np.random.Generator, low: float, high: float
) -> np.ndarray:
    ex, ny, _, _ = _cell_centers(spec)
    centers_e = rng.uniform(spec.origin_east, spec.origin_east + spec.width_m, spec.n_bumps)
    centers_n = rng.uniform(spec.origin_north, spec.origin_north + spec.height_m, spec.n_bumps)
    amps = rng.uniform(-1.0, 1.0, spec.n_bumps)
    ell2 = 2.0 * spec.lengthscale_m**2
    f = np.zeros_like(ex)
    for ce, cn, a in zip(centers_e, centers_n, amps):
        f += a * np.exp(-((ex - ce) ** 2 + (ny - cn) ** 2) / ell2)
    lo, hi = float(f.min()), float(f.max())
    if hi - lo < 1e-12:
        return np.full_like(f, (low + high) / 2.0)
    return low + (high - low) * (f - lo) / (hi - lo)


def generate_world(seed: int, spec: WorldSpec) -> World:
    """Build a deterministic synthetic lake for a seed and spec."""
    rng = np.random.default_rng(seed)
    mask = _lake_mask(spec, rng)
    origin = EnuPoint(spec.origin_east, spec.origin_north)
    grid = OccupancyGrid(origin=origin, cell_size=spec.cell_size_m, cells=mask)

    fields: dict[str, ScalarField] = {}
    for name, pspec in spec.parameters.items():
        values = _bump_field(spec, rng, pspec.low, pspec.high)
        values = np.where(mask, values, np.nan)
        fields[name] = ScalarField(
            origin=origin,
            cell_size=spec.cell_size_m,
            values=values,
            parameter=name,
            units=pspec.units or PARAMETER_UNITS.get(name, ""),
        )

    nav_rows, nav_cols = np.nonzero(mask)
    debris = []
    for _ in range(spec.n_debris):
        i = int(rng.integers(len(nav_rows)))
        center = grid.cell_center(int(nav_rows[i]), int(nav_cols[i]))
        jitter = rng.uniform(-0.4, 0.4, size=2) * spec.cell_size_m
        debris.append(EnuPoint(center.east + jitter[0], center.north + jitter[1]))

    return World(grid=grid, fields=fields, debris=debris, spec=spec)


def sample_field(field: ScalarField, p: EnuPoint) -> float:
    """Bilinear interpolation of the four surrounding cell centers.

    NaN neighbors (shoreline) are dropped with weight renormalization.
    Raises OutOfWater outside the raster or on a NODATA cell.
    """
    cs = field.cell_size
    gx = (p.east - field.origin.east) / cs
    gy = (p.north - field.origin.north) / cs
    if not (0.0 <= gx < field.width and 0.0 <= gy < field.height):
        raise OutOfWater(f"position ({p.east:.1f}, {p.north:.1f}) outside raster")
    own = field.values[int(gy), int(gx)]
    if not math.isfinite(own):
        raise OutOfWater(f"position ({p.east:.1f}, {p.north:.1f}) not navigable")

    # interpolation lattice is offset half a cell from the cell lattice
    fx = gx - 0.5
    fy = gy - 0.5
    c0 = min(max(int(math.floor(fx)), 0), max(field.width - 2, 0))
    r0 = min(max(int(math.floor(fy)), 0), max(field.height - 2, 0))
    tx = min(max(fx - c0, 0.0), 1.0)
    ty = min(max(fy - r0, 0.0), 1.0)
    c1 = min(c0 + 1, field.width - 1)
    r1 = min(r0 + 1, field.height - 1)

    corners = (
        (field.values[r0, c0], (1 - tx) * (1 - ty)),
        (field.values[r0, c1], tx * (1 - ty)),
        (field.values[r1, c0], (1 - tx) * ty),
        (field.values[r1, c1], tx * ty),
    )
    num = 0.0
    den = 0.0
    for v, w in corners:
        if math.isfinite(v):
            num += v * w
            den += w
    if den <= 0.0:
        raise OutOfWater("no data around position")
    return num / den


def read_wqp(
    pose: Pose, t: float, world: World, rng: np.random.Generator
) -> list[Sample]:
    """One noisy Sample per configured water-quality parameter."""
    samples = []
    for name in WQP_PARAMETERS:
        if name not in world.fields:
            continue
        truth = sample_field(world.fields[name], pose.position)
        sd = world.spec.parameters[name].noise_sd
        value = truth + (rng.normal(0.0, sd) if sd > 0 else 0.0)
        samples.append(
            Sample(time=t, position=pose.position, parameter=name, value=value, noise_sd=sd)
        )
    return samples


def read_sonar(
    pose: Pose, t: float, world: World, rng: np.random.Generator
) -> Sample:
    """Noisy depth reading clamped to the echosounder's working range."""
    truth = sample_field(world.fields["depth"], pose.position)
    sd = world.spec.parameters["depth"].noise_sd
    value = truth + (rng.normal(0.0, sd) if sd > 0 else 0.0)
    value = min(max(value, SONAR_MIN_DEPTH), SONAR_MAX_DEPTH)
    return Sample(time=t, position=pose.position, parameter="depth", value=value, noise_sd=sd)
