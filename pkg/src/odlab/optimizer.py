"""Alternating minimization of Dirichlet energy + edge perimeter + volume penalty.

Each outer iteration solves for u on the current set, then sweeps boundary
cells in a seeded random order and flips every cell whose exact energy change
(u frozen) is negative.  A sweep whose re-solved energy ends up above the
previous iterate is rolled back, so the recorded trace never increases.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .elliptic import (
    BoundaryDatum,
    EnergyBreakdown,
    PhaseCoefficients,
    gradient_sq,
    solve_dirichlet,
    total_energy,
)
from .errors import ParameterError, PreconditionError
from .grid import Grid2, IndicatorSet, ScalarField, disk_set

logger = logging.getLogger(__name__)

_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class OptimizerConfig:
    lam: float = 10.0
    v0: float = 0.5
    max_outer: int = 50
    pde_tol: float = 1e-10
    flip_pass_cap: int = 20
    seed: int = 0

    def validate(self, grid: Grid2) -> None:
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if not (0 <= self.v0 <= grid.area * (1 + 1e-12)):
            raise ParameterError(f"v0 must lie in [0, |Omega|], got {self.v0}")
        if self.max_outer < 1 or self.flip_pass_cap < 1:
            raise ParameterError("iteration caps must be >= 1")


@dataclass
class OptimizerTrace:
    energies: list[EnergyBreakdown] = field(default_factory=list)
    flips: list[int] = field(default_factory=list)
    reason: str = ""

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "dirichlet", "perimeter", "penalty", "total", "flips"])
            for k, (e, f) in enumerate(zip(self.energies, self.flips)):
                w.writerow([k, repr(float(e.dirichlet)), repr(float(e.perimeter)), repr(float(e.volume_penalty)),
                            repr(float(e.total)), f])


def _is_boundary_cell(cells: np.ndarray, i: int, j: int) -> bool:
    nx, ny = cells.shape
    c = cells[i, j]
    for di, dj in _NEIGHBORS:
        a, b = i + di, j + dj
        if 0 <= a < nx and 0 <= b < ny and cells[a, b] != c:
            return True
    return False


def _delta(cells, g2, h, coeff, lam, v0, area, i, j) -> float:
    nx, ny = cells.shape
    c = cells[i, j]
    same = opp = 0
    for di, dj in _NEIGHBORS:
        a, b = i + di, j + dj
        if 0 <= a < nx and 0 <= b < ny:
            if cells[a, b] == c:
                same += 1
            else:
                opp += 1
    d_perim = (same - opp) * h
    cell_area = h * h
    new_area = area - cell_area if c else area + cell_area
    d_pen = lam * (abs(new_area - v0) - abs(area - v0))
    # sigma goes alpha -> beta when leaving E, beta -> alpha when joining
    d_sigma = (coeff.beta - coeff.alpha) if c else (coeff.alpha - coeff.beta)
    d_dir = d_sigma * g2[i, j] * cell_area
    return d_perim + d_pen + d_dir


def flip_delta(E: IndicatorSet, u: ScalarField, coeff: PhaseCoefficients,
               cfg: OptimizerConfig, cell: tuple[int, int]) -> float:
    """Exact change of the discrete total energy when ``cell`` switches phase, u frozen."""
    i, j = cell
    if not _is_boundary_cell(E.cells, i, j):
        raise PreconditionError(f"cell {cell} has no neighbor of the opposite phase")
    return _delta(E.cells, gradient_sq(u), E.grid.h, coeff, cfg.lam, cfg.v0, E.area, i, j)


FlipHook = Callable[[IndicatorSet, ScalarField, tuple, float], None]


def boundary_cells(cells: np.ndarray) -> np.ndarray:
    """Mask of cells with at least one 4-neighbor of the opposite phase."""
    diff_x = cells[1:, :] != cells[:-1, :]
    diff_y = cells[:, 1:] != cells[:, :-1]
    bd = np.zeros(cells.shape, dtype=bool)
    bd[1:, :] |= diff_x
    bd[:-1, :] |= diff_x
    bd[:, 1:] |= diff_y
    bd[:, :-1] |= diff_y
    return bd


def _sweep(cells, g2, h, coeff, cfg, area, scale, rng, on_flip, u, grid):
    flips = 0
    for _ in range(cfg.flip_pass_cap):
        cand = np.argwhere(boundary_cells(cells))
        rng.shuffle(cand)
        accepted = 0
        for i, j in cand:
            if not _is_boundary_cell(cells, i, j):
                continue
            d = _delta(cells, g2, h, coeff, cfg.lam, cfg.v0, area, i, j)
            if d < -1e-12 * scale:
                if on_flip is not None:
                    on_flip(IndicatorSet(grid, cells), u, (int(i), int(j)), d)
                area += -h * h if cells[i, j] else h * h
                cells[i, j] = not cells[i, j]
                accepted += 1
        flips += accepted
        if accepted == 0:
            break
    return flips


def minimize(
    E0: IndicatorSet,
    coeff: PhaseCoefficients,
    datum: BoundaryDatum,
    cfg: OptimizerConfig,
    on_flip: Optional[FlipHook] = None,
) -> tuple[IndicatorSet, ScalarField, OptimizerTrace]:
    """Greedy alternating descent from ``E0``.

    ``on_flip(E_before, u, cell, delta)`` is called before every accepted flip.
    The trace holds one energy per accepted iterate; ``reason`` is
    ``"converged"`` (an outer iteration changed nothing, or its re-solved
    energy would have increased and was rolled back) or ``"cap"``.
    """
    grid = E0.grid
    cfg.validate(grid)
    rng = np.random.default_rng(cfg.seed)
    E = E0
    u = solve_dirichlet(E, coeff, datum, cfg.pde_tol)
    energy = total_energy(E, u, coeff, cfg.lam, cfg.v0)
    trace = OptimizerTrace([energy], [0])
    for it in range(cfg.max_outer):
        cells = E.cells.copy()
        scale = max(abs(energy.total), 1.0)
        n = _sweep(cells, gradient_sq(u), grid.h, coeff, cfg, E.area, scale, rng, on_flip, u, grid)
        if n == 0:
            trace.reason = "converged"
            break
        E_new = IndicatorSet(grid, cells)
        u_new = solve_dirichlet(E_new, coeff, datum, cfg.pde_tol, x0=u)
        e_new = total_energy(E_new, u_new, coeff, cfg.lam, cfg.v0)
        logger.info("outer %d: %d flips, total %.12g -> %.12g", it, n, energy.total, e_new.total)
        if e_new.total > energy.total:
            trace.reason = "converged"
            logger.info("re-solved energy rose; rolling back sweep %d", it)
            break
        E, u, energy = E_new, u_new, e_new
        trace.energies.append(energy)
        trace.flips.append(n)
    else:
        trace.reason = "cap"
    return E, u, trace


def local_optimality_violations(E: IndicatorSet, u: ScalarField, coeff: PhaseCoefficients,
                                cfg: OptimizerConfig) -> list[tuple[int, int, float]]:
    """Boundary cells whose single flip would lower the energy (empty list = certificate)."""
    g2 = gradient_sq(u)
    scale = max(abs(total_energy(E, u, coeff, cfg.lam, cfg.v0).total), 1.0)
    out = []
    for i, j in np.argwhere(boundary_cells(E.cells)):
        d = _delta(E.cells, g2, E.grid.h, coeff, cfg.lam, cfg.v0, E.area, i, j)
        if d < -1e-12 * scale:
            out.append((int(i), int(j), d))
    return out


def disk_of_area(grid: Grid2, area: float, center=None) -> IndicatorSet:
    """Centered disk whose analytic area is ``area``."""
    if center is None:
        x0, x1, y0, y1 = grid.bounds
        center = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    return disk_set(grid, center, math.sqrt(area / math.pi))


def random_half(grid: Grid2, seed: int = 0) -> IndicatorSet:
    """Independent fair coin per cell."""
    rng = np.random.default_rng(seed)
    return IndicatorSet(grid, rng.random(grid.shape) < 0.5)
