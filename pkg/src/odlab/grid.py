"""Uniform 2D grids, phase indicator sets and the geometry derived from them.

Cells are stored as arrays of shape ``(nx, ny)`` indexed ``[i, j]`` with ``i``
running along x.  Cell ``(i, j)`` has its center at
``origin + ((i + 1/2) h, (j + 1/2) h)``.

All balls are evaluated with the cell-center-in-ball rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import ndimage
from skimage import measure

from .errors import GridError


@dataclass(frozen=True)
class Grid2:
    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise GridError(f"grid needs nx, ny >= 4, got {self.nx}x{self.ny}")
        if not self.h > 0:
            raise GridError(f"cell size must be positive, got {self.h}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def unit(cls, n: int) -> "Grid2":
        """n x n grid covering the unit square."""
        return cls(n, n, 1.0 / n)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def width(self) -> float:
        return self.nx * self.h

    @property
    def height(self) -> float:
        return self.ny * self.h

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.width, self.height))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return (ox, ox + self.width, oy, oy + self.height)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays ``X, Y`` of shape ``(nx, ny)``."""
        ox, oy = self.origin
        x = ox + (np.arange(self.nx) + 0.5) * self.h
        y = oy + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def ball_mask(self, center: Sequence[float], r: float) -> np.ndarray:
        """Cells whose center lies in the open ball ``B_r(center)``."""
        X, Y = self.centers()
        return (X - center[0]) ** 2 + (Y - center[1]) ** 2 < r * r

    def dist_to_boundary(self, p: Sequence[float]) -> float:
        x0, x1, y0, y1 = self.bounds
        return float(min(p[0] - x0, x1 - p[0], p[1] - y0, y1 - p[1]))

    def contains_ball(self, center: Sequence[float], r: float) -> bool:
        return self.dist_to_boundary(center) >= r


@dataclass(frozen=True, eq=False)
class IndicatorSet:
    grid: Grid2
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != self.grid.shape:
            raise GridError(f"cells shape {cells.shape} does not match grid {self.grid.shape}")
        cells = cells.copy()
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_function(cls, grid: Grid2, inside) -> "IndicatorSet":
        """Cells whose center satisfies ``inside(X, Y)``."""
        X, Y = grid.centers()
        return cls(grid, np.asarray(inside(X, Y), dtype=bool))

    @classmethod
    def empty(cls, grid: Grid2) -> "IndicatorSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: Grid2) -> "IndicatorSet":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @property
    def area(self) -> float:
        return float(self.cells.sum()) * self.grid.h**2

    def complement(self) -> "IndicatorSet":
        return IndicatorSet(self.grid, ~self.cells)

    def with_cells(self, cells: np.ndarray) -> "IndicatorSet":
        return IndicatorSet(self.grid, cells)

    def __eq__(self, other):
        if not isinstance(other, IndicatorSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.cells, other.cells)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("scalar field contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid2, fn) -> "ScalarField":
        X, Y = grid.centers()
        return cls(grid, np.broadcast_to(np.asarray(fn(X, Y), dtype=float), grid.shape))

    def interpolate(self, x, y) -> np.ndarray:
        """Bilinear interpolation of the cell-centered values.

        Points beyond the outermost cell centers are clamped to the edge row.
        """
        g = self.grid
        fx = (np.asarray(x, dtype=float) - g.origin[0]) / g.h - 0.5
        fy = (np.asarray(y, dtype=float) - g.origin[1]) / g.h - 0.5
        fx = np.clip(fx, 0.0, g.nx - 1.0)
        fy = np.clip(fy, 0.0, g.ny - 1.0)
        i0 = np.minimum(np.floor(fx).astype(int), g.nx - 2)
        j0 = np.minimum(np.floor(fy).astype(int), g.ny - 2)
        tx = fx - i0
        ty = fy - j0
        v = self.values
        # difference form: reproduces constants exactly
        v00 = v[i0, j0]
        a = v00 + tx * (v[i0 + 1, j0] - v00)
        b = v[i0, j0 + 1] + tx * (v[i0 + 1, j0 + 1] - v[i0, j0 + 1])
        return a + ty * (b - a)


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Oriented polylines of ``dE`` with E on the left of each chain.

    ``loops[k]`` is an ``(m, 2)`` vertex array; a closed loop does not repeat
    its first vertex.  ``h`` is the resolution the curve was sampled at.
    """

    loops: tuple[np.ndarray, ...]
    closed: tuple[bool, ...]
    h: float

    def __post_init__(self):
        loops = []
        for lp in self.loops:
            lp = np.asarray(lp, dtype=float).reshape(-1, 2).copy()
            lp.setflags(write=False)
            loops.append(lp)
        if len(self.closed) != len(loops):
            raise GridError("closed flags must match loops")
        object.__setattr__(self, "loops", tuple(loops))
        object.__setattr__(self, "closed", tuple(bool(c) for c in self.closed))

    @classmethod
    def from_polylines(cls, polylines, h: float, closed=None) -> "BoundaryCurve":
        """Build a curve from vertex lists, dropping zero-length segments."""
        loops, flags = [], []
        for k, pl in enumerate(polylines):
            pl = np.asarray(pl, dtype=float)
            is_closed = bool(closed[k]) if closed is not None else False
            if is_closed and len(pl) > 1 and np.allclose(pl[0], pl[-1]):
                pl = pl[:-1]
            keep = np.ones(len(pl), dtype=bool)
            keep[1:] = np.any(np.abs(np.diff(pl, axis=0)) > 1e-15, axis=1)
            pl = pl[keep]
            if len(pl) < 2:
                continue
            loops.append(pl)
            flags.append(is_closed)
        return cls(tuple(loops), tuple(flags), h)

    def _segment_arrays(self):
        a, b, lid = [], [], []
        for k, (lp, c) in enumerate(zip(self.loops, self.closed)):
            end = np.roll(lp, -1, axis=0) if c else lp[1:]
            start = lp if c else lp[:-1]
            a.append(start)
            b.append(end)
            lid.append(np.full(len(start), k))
        if not a:
            return np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int)
        return np.concatenate(a), np.concatenate(b), np.concatenate(lid)

    @cached_property
    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        a, b, _ = self._segment_arrays()
        return a, b

    @cached_property
    def segment_loop(self) -> np.ndarray:
        return self._segment_arrays()[2]

    @cached_property
    def lengths(self) -> np.ndarray:
        a, b = self.segments
        return np.hypot(*(b - a).T)

    @cached_property
    def midpoints(self) -> np.ndarray:
        a, b = self.segments
        return 0.5 * (a + b)

    @cached_property
    def normals(self) -> np.ndarray:
        """Outward unit normals (E lies on the left of the travel direction)."""
        a, b = self.segments
        d = b - a
        if len(d) == 0:
            return np.zeros((0, 2))
        return np.column_stack([d[:, 1], -d[:, 0]]) / self.lengths[:, None]

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @cached_property
    def vertices(self) -> np.ndarray:
        if not self.loops:
            return np.zeros((0, 2))
        return np.concatenate(self.loops)

    def transformed(self, scale: float = 1.0, shift=(0.0, 0.0)) -> "BoundaryCurve":
        shift = np.asarray(shift, dtype=float)
        return BoundaryCurve(
            tuple(lp * scale + shift for lp in self.loops), self.closed, self.h * scale
        )

    def densified(self, spacing: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Points along the curve with gaps at most ``spacing``.

        Returns ``(points, seg_a, seg_b)`` where ``seg_a/seg_b`` are the
        endpoints of the densified sub-segments (used for exact distances).
        """
        a, b = self.segments
        if len(a) == 0:
            empty = np.zeros((0, 2))
            return empty, empty, empty
        pieces = np.maximum(1, np.ceil(self.lengths / spacing).astype(int))
        rep = np.repeat(np.arange(len(a)), pieces)
        k = np.arange(pieces.sum()) - np.repeat(np.cumsum(pieces) - pieces, pieces)
        t0 = (k / pieces[rep])[:, None]
        t1 = ((k + 1) / pieces[rep])[:, None]
        da = a[rep] + t0 * (b[rep] - a[rep])
        db = a[rep] + t1 * (b[rep] - a[rep])
        return np.concatenate([da, b[-1:]]), da, db


@dataclass(frozen=True, eq=False)
class ComponentLabels:
    grid: Grid2
    label: np.ndarray
    count: int
    areas: np.ndarray

    def mask(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.count:
            raise GridError(f"invalid component label {k} (have {self.count})")
        return self.label == k


def _check(E: IndicatorSet):
    if E.cells.shape != E.grid.shape:
        raise GridError("indicator set does not conform to its grid")


SMOOTHING_PASSES = 2
_MIN_SMOOTH_VERTICES = 8


def _smooth(lp: np.ndarray, closed: bool) -> np.ndarray:
    # [1/4, 1/2, 1/4] vertex averaging; open-chain endpoints stay put
    lp = lp.copy()
    for _ in range(SMOOTHING_PASSES):
        if closed:
            lp = 0.5 * lp + 0.25 * (np.roll(lp, 1, axis=0) + np.roll(lp, -1, axis=0))
        else:
            lp[1:-1] = 0.5 * lp[1:-1] + 0.25 * (lp[:-2] + lp[2:])
    return lp


def _extend_to_edge(p: np.ndarray, g: Grid2) -> np.ndarray | None:
    """Point on the domain edge continuing a chain that ends on the outer cell-center line."""
    x0, x1, y0, y1 = g.bounds
    tol = 1e-9 * g.h
    hh = 0.5 * g.h
    if abs(p[0] - (x0 + hh)) < tol:
        return np.array([x0, p[1]])
    if abs(p[0] - (x1 - hh)) < tol:
        return np.array([x1, p[1]])
    if abs(p[1] - (y0 + hh)) < tol:
        return np.array([p[0], y0])
    if abs(p[1] - (y1 - hh)) < tol:
        return np.array([p[0], y1])
    return None


def extract_boundary(E: IndicatorSet) -> BoundaryCurve:
    """Level-1/2 marching-squares contours of the cell-centered indicator.

    E is treated as 4-connected (saddles separate diagonal E cells).  Loops
    are oriented counter-clockwise around E, so outward normals are the
    tangents rotated clockwise.  Vertices of loops with at least 8 vertices
    get two passes of [1/4, 1/2, 1/4] averaging, which removes the 45-degree
    staircase bias of binary contours; chains that stop at the outermost
    cell-center line are continued straight to the domain edge.
    """
    _check(E)
    g = E.grid
    if not E.cells.any() or E.cells.all():
        return BoundaryCurve((), (), g.h)
    raw = measure.find_contours(
        E.cells.astype(float), 0.5, fully_connected="low", positive_orientation="high"
    )
    polylines, closed = [], []
    ox, oy = g.origin
    for c in raw:
        xy = np.column_stack([ox + (c[:, 0] + 0.5) * g.h, oy + (c[:, 1] + 0.5) * g.h])
        is_closed = len(c) > 2 and np.array_equal(c[0], c[-1])
        if is_closed:
            xy = xy[:-1]
        if len(xy) >= _MIN_SMOOTH_VERTICES:
            xy = _smooth(xy, is_closed)
        if not is_closed:
            head, tail = _extend_to_edge(xy[0], g), _extend_to_edge(xy[-1], g)
            parts = ([head[None]] if head is not None else []) + [xy]
            parts += [tail[None]] if tail is not None else []
            xy = np.concatenate(parts)
        polylines.append(xy)
        closed.append(is_closed)
    return BoundaryCurve.from_polylines(polylines, g.h, closed)


def label_components(E: IndicatorSet) -> ComponentLabels:
    """4-connected components, labelled in first-seen order of a C-order scan."""
    label, count = ndimage.label(E.cells)
    areas = np.bincount(label.ravel(), minlength=count + 1)[1:] * E.grid.h**2
    return ComponentLabels(E.grid, label, int(count), areas.astype(float))


def distance_transform(E: IndicatorSet) -> ScalarField:
    """Exact Euclidean distance from every cell center to the nearest E cell center.

    For empty E every value equals the finite cap ``2 * diam(Omega)``.
    """
    g = E.grid
    if not E.cells.any():
        return ScalarField(g, np.full(g.shape, 2.0 * g.diameter))
    d = ndimage.distance_transform_edt(~E.cells, sampling=g.h)
    return ScalarField(g, d)


def edge_perimeter(E: IndicatorSet) -> float:
    """Number of interior cell faces separating the phases, times h."""
    c = E.cells
    n = np.count_nonzero(c[1:, :] != c[:-1, :]) + np.count_nonzero(c[:, 1:] != c[:, :-1])
    return float(n) * E.grid.h


def relative_perimeter(E: IndicatorSet, center, r: float, curve: BoundaryCurve | None = None) -> float:
    """Length of the boundary polyline whose segment midpoints lie in ``B_r(center)``."""
    if r < 2 * E.grid.h:
        raise GridError(f"radius {r} below resolved scale 2h = {2 * E.grid.h}")
    if curve is None:
        curve = extract_boundary(E)
    return curve_length_in_ball(curve, center, r)


def curve_length_in_ball(curve: BoundaryCurve, center, r: float) -> float:
    if len(curve.lengths) == 0:
        return 0.0
    d = curve.midpoints - np.asarray(center, dtype=float)
    inside = np.einsum("ij,ij->i", d, d) < r * r
    return float(curve.lengths[inside].sum())


def ball_area(E: IndicatorSet, center, r: float) -> tuple[float, float]:
    """``(|E ∩ B_r|, |B_r \\ E|)`` by cell-center counting."""
    if r < E.grid.h:
        raise GridError(f"radius {r} below cell size {E.grid.h}")
    m = E.grid.ball_mask(center, r)
    h2 = E.grid.h**2
    inside = np.count_nonzero(m & E.cells)
    return inside * h2, (np.count_nonzero(m) - inside) * h2


def disk_set(grid: Grid2, center, radius: float) -> IndicatorSet:
    return IndicatorSet.from_function(
        grid, lambda X, Y: (X - center[0]) ** 2 + (Y - center[1]) ** 2 < radius**2
    )
