import numpy as np
import pytest

from odlab.errors import FormatError
from odlab.grid import BoundaryCurve, Grid2, IndicatorSet, ScalarField, disk_set, extract_boundary
from odlab.io import (
    pgm_bytes,
    read_curve_csv,
    read_field_csv,
    read_field_raw,
    read_grid_text,
    read_indicator,
    read_pgm,
    write_curve_csv,
    write_field_csv,
    write_field_raw,
    write_grid_text,
    write_pgm,
)


def sample_set():
    g = Grid2(12, 8, 0.125, (1.0, -0.5))
    rng = np.random.default_rng(0)
    return IndicatorSet(g, rng.random(g.shape) < 0.4)


def test_grid_text_round_trip(tmp_path):
    E = sample_set()
    p = tmp_path / "E.txt"
    write_grid_text(E, p)
    back = read_grid_text(p)
    assert back.grid == E.grid and np.array_equal(back.cells, E.cells)
    assert read_indicator(p) == back
    lines = p.read_text().splitlines()
    # top row is the largest y
    assert lines[1] == "".join("1" if v else "0" for v in E.cells[:, -1])


def test_grid_text_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("4 2 0.25 0 0\n0101\n01\n")
    with pytest.raises(FormatError):
        read_grid_text(p)
    p.write_text("four 2 0.25 0 0\n")
    with pytest.raises(FormatError):
        read_grid_text(p)
    p.write_text("")
    with pytest.raises(FormatError):
        read_grid_text(p)


def test_pgm_round_trip(tmp_path):
    E = sample_set()
    p = tmp_path / "E.pgm"
    write_pgm(E, p)
    back = read_pgm(p, h=E.grid.h, origin=E.grid.origin)
    assert back == E
    assert read_indicator(p, h=E.grid.h, origin=E.grid.origin) == E
    assert p.read_bytes() == pgm_bytes(E)
    assert read_pgm(p).grid.h == pytest.approx(1 / 12)


def test_pgm_errors(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(FormatError):
        read_pgm(p)
    p.write_bytes(b"P5\n2 2\n255\n\x00\x00")
    with pytest.raises(FormatError):
        read_pgm(p)
    p.write_bytes(b"P5\n2 2\n15\n\x00\x00\x00\x00")
    with pytest.raises(FormatError):
        read_pgm(p)
    p.write_bytes(b"P5\n2 2\n255\n\x00\x00\x00\x00")
    with pytest.raises(FormatError):
        read_pgm(p)
    raster = np.zeros((4, 4), dtype=np.uint8)
    raster[0, 0] = 255  # top-left pixel: i = 0, j = ny - 1
    p.write_bytes(b"P5\n# comment\n4 4\n255\n" + raster.tobytes())
    E = read_pgm(p)
    assert E.cells[0, 3] and E.cells.sum() == 1


def test_field_round_trips(tmp_path):
    g = Grid2(6, 5, 0.2, (0.0, 1.0))
    u = ScalarField(g, np.random.default_rng(1).normal(size=g.shape))
    write_field_raw(u, tmp_path / "u.f64")
    back = read_field_raw(tmp_path / "u.f64")
    assert back.grid == g and np.array_equal(back.values, u.values)
    write_field_csv(u, tmp_path / "u.csv")
    assert np.array_equal(read_field_csv(tmp_path / "u.csv", g).values, u.values)
    (tmp_path / "short.f64").write_bytes((tmp_path / "u.f64").read_bytes()[:-8])
    with pytest.raises(FormatError):
        read_field_raw(tmp_path / "short.f64")
    with pytest.raises(FormatError):
        read_field_csv(tmp_path / "u.csv", Grid2(7, 5, 0.2))


def test_curve_round_trip(tmp_path):
    g = Grid2.unit(64)
    c = extract_boundary(disk_set(g, (0.3, 0.6), 0.2))
    open_chain = BoundaryCurve.from_polylines([np.array([[0.0, 0.0], [0.5, 0.1], [1.0, 0.0]])], g.h, [False])
    for curve in (c, open_chain):
        write_curve_csv(curve, tmp_path / "c.csv")
        back = read_curve_csv(tmp_path / "c.csv", curve.h)
        assert back.closed == curve.closed
        assert all(np.array_equal(a, b) for a, b in zip(back.loops, curve.loops))
