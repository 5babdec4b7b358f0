"""Raster grids: cell math and the ASCII grid interchange format."""

import numpy as np
import pytest

from aquamon.frames import EnuPoint
from aquamon.rasters import (
    NODATA,
    OccupancyGrid,
    ScalarField,
    read_ascii_grid,
    write_ascii_grid,
)


def small_grid() -> OccupancyGrid:
    cells = np.ones((4, 6), dtype=bool)
    cells[1, 2] = False
    return OccupancyGrid(origin=EnuPoint(100.0, 200.0), cell_size=5.0, cells=cells)


class TestOccupancyGrid:
    def test_row_zero_is_southmost(self):
        g = small_grid()
        c = g.cell_center(0, 0)
        assert c.east == pytest.approx(102.5)
        assert c.north == pytest.approx(202.5)
        top = g.cell_center(3, 0)
        assert top.north > c.north

    def test_cell_of_inverts_cell_center(self):
        g = small_grid()
        for r in range(4):
            for c in range(6):
                assert g.cell_of(g.cell_center(r, c)) == (r, c)

    def test_contains_edges(self):
        g = small_grid()
        assert g.contains(EnuPoint(100.0, 200.0))
        assert g.contains(EnuPoint(129.999, 219.999))
        assert not g.contains(EnuPoint(130.0, 210.0))
        assert not g.contains(EnuPoint(99.999, 210.0))

    def test_is_navigable(self):
        g = small_grid()
        assert g.is_navigable(g.cell_center(0, 0))
        assert not g.is_navigable(g.cell_center(1, 2))
        assert not g.is_navigable(EnuPoint(0.0, 0.0))  # off-grid

    def test_dimensions(self):
        g = small_grid()
        assert (g.height, g.width) == (4, 6)


class TestAsciiGrid:
    def make_field(self):
        values = np.array(
            [
                [1.25, 2.5, np.nan],
                [0.1, -3.75, 4.0],
            ]
        )
        return ScalarField(
            origin=EnuPoint(10.0, 20.0),
            cell_size=2.5,
            values=values,
            parameter="turbidity",
            units="NTU",
        )

    def test_header_layout(self, tmp_path):
        path = tmp_path / "f.asc"
        write_ascii_grid(self.make_field(), path)
        lines = path.read_text().splitlines()
        assert lines[0].split() == ["ncols", "3"]
        assert lines[1].split() == ["nrows", "2"]
        assert lines[2].split() == ["xllcorner", "10.0"]
        assert lines[3].split() == ["yllcorner", "20.0"]
        assert lines[4].split() == ["cellsize", "2.5"]
        assert lines[5].split() == ["NODATA_value", "-9999"]
        # body rows are north-first; NaN serializes as the NODATA marker
        assert lines[6].split() == ["0.1", "-3.75", "4.0"]
        assert lines[7].split() == ["1.25", "2.5", "-9999"]

    def test_round_trip_exact(self, tmp_path):
        field = self.make_field()
        path = tmp_path / "f.asc"
        write_ascii_grid(field, path)
        back = read_ascii_grid(path, parameter="turbidity", units="NTU")
        assert back.origin == field.origin
        assert back.cell_size == field.cell_size
        assert np.array_equal(back.values, field.values, equal_nan=True)
        assert back.parameter == "turbidity"

    def test_full_precision_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        values = rng.standard_normal((7, 9)) * 1e3
        field = ScalarField(
            origin=EnuPoint(-3.125, 8.0), cell_size=1.75, values=values, parameter="x"
        )
        path = tmp_path / "p.asc"
        write_ascii_grid(field, path)
        back = read_ascii_grid(path)
        # repr-based serialization keeps every bit of the float64 payload
        assert np.array_equal(back.values, values)

    def test_rewrite_is_byte_identical(self, tmp_path):
        field = self.make_field()
        a, b = tmp_path / "a.asc", tmp_path / "b.asc"
        write_ascii_grid(field, a)
        write_ascii_grid(read_ascii_grid(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_nodata_constant(self):
        assert NODATA == -9999.0
