"""Plain-text, PGM, CSV and raw binary formats for grids, fields and curves."""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, GridError
from .grid import BoundaryCurve, Grid2, IndicatorSet, ScalarField


def write_grid_text(E: IndicatorSet, path) -> None:
    """First line ``nx ny h ox oy``, then ``ny`` rows of '0'/'1', top row first."""
    g = E.grid
    lines = [f"{g.nx} {g.ny} {g.h!r} {g.origin[0]!r} {g.origin[1]!r}"]
    for j in range(g.ny - 1, -1, -1):
        lines.append("".join("1" if v else "0" for v in E.cells[:, j]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_grid_text(path) -> IndicatorSet:
    text = Path(path).read_text(encoding="utf-8")
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise FormatError(f"{path}: empty grid file")
    head = rows[0].split()
    try:
        nx, ny = int(head[0]), int(head[1])
        h, ox, oy = (float(v) for v in head[2:5])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: bad header {rows[0]!r}") from exc
    body = rows[1:]
    if len(body) != ny or any(len(r) != nx or set(r) - {"0", "1"} for r in body):
        raise FormatError(f"{path}: expected {ny} rows of {nx} '0'/'1' characters")
    cells = np.array([[c == "1" for c in r] for r in reversed(body)], dtype=bool).T
    try:
        return IndicatorSet(Grid2(nx, ny, h, (ox, oy)), cells)
    except GridError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def pgm_bytes(E: IndicatorSet) -> bytes:
    g = E.grid
    img = np.where(E.cells, 255, 0).astype(np.uint8)[:, ::-1].T
    return f"P5\n{g.nx} {g.ny}\n255\n".encode("ascii") + img.tobytes()


def write_pgm(E: IndicatorSet, path) -> None:
    """Binary PGM (P5, maxval 255, 255 = inside), top image row = largest y.

    PGM carries no geometry; readers supply ``h`` and the origin.
    """
    Path(path).write_bytes(pgm_bytes(E))


def read_pgm(path, h: float | None = None, origin=(0.0, 0.0)) -> IndicatorSet:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5)")
    try:
        nx, ny, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: expected maxval 255, got {maxval}")
    pos += 1
    raw = data[pos : pos + nx * ny]
    if len(raw) != nx * ny:
        raise FormatError(f"{path}: truncated PGM raster")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(ny, nx)
    cells = img.T[:, ::-1] >= 128
    if h is None:
        h = 1.0 / max(nx, ny)
    try:
        return IndicatorSet(Grid2(nx, ny, h, origin), cells)
    except GridError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def read_indicator(path, h: float | None = None, origin=(0.0, 0.0)) -> IndicatorSet:
    """Dispatch on the file's magic bytes: PGM or the text grid format."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return read_pgm(path, h, origin)
    return read_grid_text(path)


def write_curve_csv(curve: BoundaryCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["loop_id", "vertex_id", "x", "y"])
        for k, lp in enumerate(curve.loops):
            for v, (x, y) in enumerate(lp):
                w.writerow([k, v, repr(float(x)), repr(float(y))])


def read_curve_csv(path, h: float) -> BoundaryCurve:
    """Loops are read back as closed when their last vertex touches the first
    within ``h`` distance; otherwise they are open chains."""
    loops: dict[int, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            loops.setdefault(int(row["loop_id"]), []).append(
                (int(row["vertex_id"]), float(row["x"]), float(row["y"]))
            )
    polys, closed = [], []
    for k in sorted(loops):
        pts = np.array([p[1:] for p in sorted(loops[k])])
        polys.append(pts)
        closed.append(len(pts) > 2 and np.hypot(*(pts[0] - pts[-1])) <= h * (1 + 1e-9))
    return BoundaryCurve.from_polylines(polys, h, closed)


def write_field_csv(u: ScalarField, path) -> None:
    g = u.grid
    I, J = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")
    buf = io.StringIO()
    buf.write("i,j,value\n")
    for i, j, v in zip(I.ravel(), J.ravel(), u.values.ravel()):
        buf.write(f"{i},{j},{float(v)!r}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def read_field_csv(path, grid: Grid2) -> ScalarField:
    values = np.full(grid.shape, np.nan)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            values[int(row["i"]), int(row["j"])] = float(row["value"])
    if np.isnan(values).any():
        raise FormatError(f"{path}: missing cells for grid {grid.shape}")
    return ScalarField(grid, values)


def field_bytes(u: ScalarField) -> bytes:
    g = u.grid
    header = struct.pack("<5d", g.nx, g.ny, g.h, g.origin[0], g.origin[1])
    return header + u.values.astype("<f8").tobytes(order="C")


def write_field_raw(u: ScalarField, path) -> None:
    """Little-endian float64: header ``nx, ny, h, ox, oy`` then values, C order over ``[i, j]``."""
    Path(path).write_bytes(field_bytes(u))


def read_field_raw(path) -> ScalarField:
    data = Path(path).read_bytes()
    if len(data) < 40:
        raise FormatError(f"{path}: truncated field header")
    nx, ny, h, ox, oy = struct.unpack("<5d", data[:40])
    if nx != int(nx) or ny != int(ny):
        raise FormatError(f"{path}: non-integer grid size in header")
    nx, ny = int(nx), int(ny)
    body = data[40:]
    if len(body) != 8 * nx * ny:
        raise FormatError(f"{path}: expected {nx * ny} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(nx, ny)
    try:
        return ScalarField(Grid2(nx, ny, h, (ox, oy)), values)
    except GridError as exc:
        raise FormatError(f"{path}: {exc}") from exc
