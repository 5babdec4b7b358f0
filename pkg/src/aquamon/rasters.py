"""Raster geometry shared by the world model, the planner and the GP maps.

Grids are row-major numpy arrays indexed ``[row, col]`` where row 0 is the
southmost row and col 0 the westmost column; ``origin`` is the lower-left
corner of cell (0, 0).  Missing values in scalar fields are NaN in memory
and -9999 in the ESRI ASCII export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frames import EnuPoint

NODATA = -9999.0

WQP_PARAMETERS = ("ph", "temperature", "conductivity", "turbidity")
ALL_PARAMETERS = ("depth",) + WQP_PARAMETERS

PARAMETER_UNITS = {
    "depth": "m",
    "ph": "pH",
    "temperature": "degC",
    "conductivity": "mS/cm",
    "turbidity": "NTU",
}


@dataclass
class OccupancyGrid:
    """Rasterized navigability mask (True = navigable water)."""

    origin: EnuPoint
    cell_size: float
    cells: np.ndarray  # bool, shape (height, width)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=bool)
        if self.cells.ndim != 2:
            raise ValueError("cells must be a 2-D matrix")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def contains(self, p: EnuPoint) -> bool:
        dx = p.east - self.origin.east
        dy = p.north - self.origin.north
        return (
            0.0 <= dx < self.width * self.cell_size
            and 0.0 <= dy < self.height * self.cell_size
        )

    def cell_of(self, p: EnuPoint) -> tuple[int, int]:
        """Row/col of the cell containing p.  Caller checks contains() first."""
        col = int(math.floor((p.east - self.origin.east) / self.cell_size))
        row = int(math.floor((p.north - self.origin.north) / self.cell_size))
        return row, col

    def cell_center(self, row: int, col: int) -> EnuPoint:
        return EnuPoint(
            east=self.origin.east + (col + 0.5) * self.cell_size,
            north=self.origin.north + (row + 0.5) * self.cell_size,
        )

    def is_navigable(self, p: EnuPoint) -> bool:
        if not self.contains(p):
            return False
        row, col = self.cell_of(p)
        return bool(self.cells[row, col])


@dataclass
class ScalarField:
    """Continuous scalar map sharing an OccupancyGrid's geometry."""

    origin: EnuPoint
    cell_size: float
    values: np.ndarray  # float, shape (height, width); NaN = no data
    parameter: str
    units: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if not self.units:
            self.units = PARAMETER_UNITS.get(self.parameter, "")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def cell_center(self, row: int, col: int) -> EnuPoint:
        return EnuPoint(
            east=self.origin.east + (col + 0.5) * self.cell_size,
            north=self.origin.north + (row + 0.5) * self.cell_size,
        )


def _fmt(x: float) -> str:
    # repr keeps the shortest exact decimal form for round-tripping
    return repr(float(x))


def write_ascii_grid(field: ScalarField, path) -> None:
    """Write an ESRI ASCII grid file (top row first, NaN -> -9999)."""
    lines = [
        f"ncols {field.width}",
        f"nrows {field.height}",
        f"xllcorner {_fmt(field.origin.east)}",
        f"yllcorner {_fmt(field.origin.north)}",
        f"cellsize {_fmt(field.cell_size)}",
        "NODATA_value -9999",
    ]
    vals = field.values
    for row in range(field.height - 1, -1, -1):
        parts = []
        for col in range(field.width):
            v = vals[row, col]
            parts.append("-9999" if not math.isfinite(v) else _fmt(v))
        lines.append(" ".join(parts))
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_ascii_grid(path, parameter: str = "", units: str = "") -> ScalarField:
    """Parse an ESRI ASCII grid file back into a ScalarField."""
    with open(path, "r", encoding="ascii") as f:
        tokens = f.read().split()
    header = {}
    i = 0
    for _ in range(6):
        key = tokens[i].lower()
        header[key] = tokens[i + 1]
        i += 2
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    nodata = float(header.get("nodata_value", NODATA))
    raw = np.array([float(t) for t in tokens[i:]], dtype=float)
    if raw.size != nrows * ncols:
        raise ValueError(
            f"expected {nrows * ncols} values, found {raw.size}"
        )
    grid = raw.reshape(nrows, ncols)[::-1].copy()  # file is top row first
    grid[grid == nodata] = np.nan
    return ScalarField(
        origin=EnuPoint(float(header["xllcorner"]), float(header["yllcorner"])),
        cell_size=float(header["cellsize"]),
        values=grid,
        parameter=parameter,
        units=units,
    )
