"""Two-phase Dirichlet problem ``-div(sigma grad u) = 0`` on a uniform grid,
plus the energy functionals and local identities evaluated on its solutions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import DegenerateProbeError, DomainError, GridError, ParameterError, SolverError
from .grid import Grid2, IndicatorSet, ScalarField, edge_perimeter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhaseCoefficients:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0 < self.alpha <= self.beta):
            raise ParameterError(f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}")

    @property
    def ratio(self) -> float:
        return self.beta / self.alpha

    @property
    def gamma(self) -> float:
        """Monotonicity exponent ``2 sqrt(alpha / beta)``."""
        return 2.0 * math.sqrt(self.alpha / self.beta)

    def sigma(self, E: IndicatorSet) -> ScalarField:
        return ScalarField(E.grid, np.where(E.cells, self.alpha, self.beta))


_SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class BoundaryDatum:
    """Dirichlet data on the four domain sides.

    ``kind`` is ``"linear"`` (``params = (gx, gy)``, ``u0 = gx x + gy y``),
    ``"angular"`` (``params = (k,)``, ``u0 = cos(k theta)`` about the domain
    center) or ``"tabulated"`` (``values`` maps each side to one value per
    boundary face: ``left``/``right`` have ``ny`` entries ordered by j,
    ``bottom``/``top`` have ``nx`` entries ordered by i).
    """

    kind: str
    params: tuple = ()
    values: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind == "linear" and len(self.params) != 2:
            raise ParameterError("linear datum needs (gx, gy)")
        elif self.kind == "angular" and len(self.params) != 1:
            raise ParameterError("angular datum needs (k,)")
        elif self.kind == "tabulated":
            missing = [s for s in _SIDES if s not in self.values]
            if missing:
                raise ParameterError(f"tabulated datum missing sides {missing}")
            for s in _SIDES:
                if not np.all(np.isfinite(np.asarray(self.values[s], dtype=float))):
                    raise ParameterError(f"tabulated datum has non-finite values on {s}")
        elif self.kind not in ("linear", "angular", "tabulated"):
            raise ParameterError(f"unknown datum kind {self.kind!r}")

    @classmethod
    def linear(cls, gx: float, gy: float) -> "BoundaryDatum":
        return cls("linear", (float(gx), float(gy)))

    @classmethod
    def angular(cls, k: float) -> "BoundaryDatum":
        return cls("angular", (float(k),))

    @classmethod
    def zero(cls) -> "BoundaryDatum":
        return cls.linear(0.0, 0.0)

    @classmethod
    def from_function(cls, grid: Grid2, fn) -> "BoundaryDatum":
        """Tabulate ``fn(x, y)`` at the boundary face midpoints of ``grid``."""
        pts = boundary_face_points(grid)
        return cls("tabulated", values={s: np.asarray(fn(*pts[s]), dtype=float) for s in _SIDES})

    def face_values(self, grid: Grid2) -> dict[str, np.ndarray]:
        pts = boundary_face_points(grid)
        if self.kind == "linear":
            gx, gy = self.params
            return {s: gx * pts[s][0] + gy * pts[s][1] for s in _SIDES}
        if self.kind == "angular":
            (k,) = self.params
            x0, x1, y0, y1 = grid.bounds
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            return {s: np.cos(k * np.arctan2(pts[s][1] - cy, pts[s][0] - cx)) for s in _SIDES}
        out = {}
        for s in _SIDES:
            v = np.asarray(self.values[s], dtype=float)
            n = grid.ny if s in ("left", "right") else grid.nx
            if v.shape != (n,):
                raise GridError(f"tabulated datum side {s} has shape {v.shape}, grid needs ({n},)")
            out[s] = v
        return out


def boundary_face_points(grid: Grid2) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    x0, x1, y0, y1 = grid.bounds
    xs = x0 + (np.arange(grid.nx) + 0.5) * grid.h
    ys = y0 + (np.arange(grid.ny) + 0.5) * grid.h
    return {
        "left": (np.full(grid.ny, x0), ys),
        "right": (np.full(grid.ny, x1), ys),
        "bottom": (xs, np.full(grid.nx, y0)),
        "top": (xs, np.full(grid.nx, y1)),
    }


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def assemble(sigma: np.ndarray, face_vals: dict[str, np.ndarray]):
    """Five-point matrix and right-hand side for the finite-volume scheme.

    Interior faces carry the harmonic mean of the adjacent cell values;
    boundary faces sit at distance h/2 from the cell center, hence weight 2 sigma.
    Unknowns are ordered C-style over ``[i, j]``.
    """
    nx, ny = sigma.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    tx = _harmonic(sigma[:-1, :], sigma[1:, :])
    ty = _harmonic(sigma[:, :-1], sigma[:, 1:])
    diag = np.zeros((nx, ny))
    diag[:-1, :] += tx
    diag[1:, :] += tx
    diag[:, :-1] += ty
    diag[:, 1:] += ty
    rhs = np.zeros((nx, ny))
    for s, sl in (("left", (0, slice(None))), ("right", (-1, slice(None))),
                  ("bottom", (slice(None), 0)), ("top", (slice(None), -1))):
        w = 2.0 * sigma[sl]
        diag[sl] += w
        rhs[sl] += w * face_vals[s]
    rows = np.concatenate([idx.ravel(), idx[:-1, :].ravel(), idx[1:, :].ravel(),
                           idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    cols = np.concatenate([idx.ravel(), idx[1:, :].ravel(), idx[:-1, :].ravel(),
                           idx[:, 1:].ravel(), idx[:, :-1].ravel()])
    vals = np.concatenate([diag.ravel(), -tx.ravel(), -tx.ravel(), -ty.ravel(), -ty.ravel()])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    return A, rhs.ravel()


def solve_dirichlet(
    E: IndicatorSet,
    coeff: PhaseCoefficients,
    datum: BoundaryDatum,
    tol: float = 1e-8,
    x0: ScalarField | None = None,
) -> ScalarField:
    """Solve the two-phase problem to relative residual ``tol``.

    Uses conjugate gradients preconditioned by smoothed-aggregation AMG.
    Raises :class:`SolverError` carrying the last residual on non-convergence.
    """
    if not (0 < tol <= 1e-3):
        raise ParameterError(f"tol must lie in (0, 1e-3], got {tol}")
    g = E.grid
    sigma = np.where(E.cells, coeff.alpha, coeff.beta)
    A, b = assemble(sigma, datum.face_values(g))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return ScalarField(g, np.zeros(g.shape))
    maxiter = 50 * (g.nx + g.ny)
    # 'local' weighting avoids pyamg's randomized spectral-radius estimate,
    # keeping the preconditioner (and hence u) bit-reproducible
    ml = pyamg.smoothed_aggregation_solver(
        A, symmetry="symmetric", smooth=("jacobi", {"omega": 4.0 / 3.0, "weighting": "local"})
    )
    guess = None if x0 is None else x0.values.ravel()
    u, info = cg(A, b, x0=guess, rtol=tol, atol=0.0, maxiter=maxiter, M=ml.aspreconditioner())
    res = float(np.linalg.norm(b - A @ u) / bnorm)
    if info != 0 or res > tol:
        raise SolverError(f"CG did not reach tol {tol:g} within {maxiter} iterations", res)
    logger.debug("solve_dirichlet %dx%d residual %.3e", g.nx, g.ny, res)
    return ScalarField(g, u.reshape(g.shape))


def scheme_energy(u: ScalarField, E: IndicatorSet, coeff: PhaseCoefficients, datum: BoundaryDatum) -> float:
    """Quadratic form minimized by :func:`solve_dirichlet` (face-based energy)."""
    sigma = np.where(E.cells, coeff.alpha, coeff.beta)
    v = u.values
    fv = datum.face_values(u.grid)
    e = np.sum(_harmonic(sigma[:-1, :], sigma[1:, :]) * np.diff(v, axis=0) ** 2)
    e += np.sum(_harmonic(sigma[:, :-1], sigma[:, 1:]) * np.diff(v, axis=1) ** 2)
    e += np.sum(2 * sigma[0, :] * (v[0, :] - fv["left"]) ** 2)
    e += np.sum(2 * sigma[-1, :] * (v[-1, :] - fv["right"]) ** 2)
    e += np.sum(2 * sigma[:, 0] * (v[:, 0] - fv["bottom"]) ** 2)
    e += np.sum(2 * sigma[:, -1] * (v[:, -1] - fv["top"]) ** 2)
    return float(e)


def face_flux_imbalance(u: ScalarField, E: IndicatorSet, coeff: PhaseCoefficients,
                        datum: BoundaryDatum, i_range, j_range) -> float:
    """Net flux out of the cell rectangle ``i_range x j_range`` (half-open ranges)."""
    sigma = np.where(E.cells, coeff.alpha, coeff.beta)
    A, b = assemble(sigma, datum.face_values(u.grid))
    r = (A @ u.values.ravel() - b).reshape(u.grid.shape)
    return float(r[slice(*i_range), slice(*j_range)].sum())


def gradient(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Central differences inside, one-sided at the domain edge."""
    gx, gy = np.gradient(u.values, u.grid.h, edge_order=1)
    return gx, gy


def gradient_sq(u: ScalarField) -> np.ndarray:
    gx, gy = gradient(u)
    return gx * gx + gy * gy


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    perimeter: float
    volume_penalty: float
    total: float
    lam: float
    v0: float
    area: float = float("nan")


def dirichlet_energy(E: IndicatorSet, u: ScalarField, coeff: PhaseCoefficients) -> float:
    sigma = np.where(E.cells, coeff.alpha, coeff.beta)
    return float(np.sum(sigma * gradient_sq(u)) * E.grid.h**2)


def total_energy(E: IndicatorSet, u: ScalarField, coeff: PhaseCoefficients,
                 lam: float, v0: float) -> EnergyBreakdown:
    if E.grid != u.grid:
        raise GridError("indicator set and field live on different grids")
    d = dirichlet_energy(E, u, coeff)
    p = edge_perimeter(E)
    area = E.area
    pen = lam * abs(area - v0)
    return EnergyBreakdown(d, p, pen, d + p + pen, lam, v0, area)


def _check_ball(grid: Grid2, center, r: float, min_r: float, margin: float = 0.0):
    if r < min_r * (1 - 1e-12):
        raise GridError(f"radius {r:g} below resolved scale {min_r:g}")
    if grid.dist_to_boundary(center) < r + margin - 1e-12:
        raise DomainError(f"ball B_{r:g}({center[0]:g}, {center[1]:g}) leaves the domain")


def local_energy(u: ScalarField, sigma: ScalarField, center, r: float) -> float:
    """``sum sigma |grad u|^2 h^2`` over cells with center in ``B_r(center)``."""
    g = u.grid
    _check_ball(g, center, r, 2 * g.h)
    m = g.ball_mask(center, r)
    return float(np.sum((sigma.values * gradient_sq(u))[m]) * g.h**2)


def circle_points(center, r: float, h: float) -> tuple[np.ndarray, np.ndarray, float]:
    m = max(8, math.ceil(2 * math.pi * r / h))
    theta = 2 * math.pi * np.arange(m) / m
    nrm = np.column_stack([np.cos(theta), np.sin(theta)])
    pts = np.asarray(center, dtype=float) + r * nrm
    return pts, nrm, 2 * math.pi * r / m


def _sigma_at(sigma: ScalarField, pts: np.ndarray) -> np.ndarray:
    g = sigma.grid
    i = np.clip(((pts[:, 0] - g.origin[0]) // g.h).astype(int), 0, g.nx - 1)
    j = np.clip(((pts[:, 1] - g.origin[1]) // g.h).astype(int), 0, g.ny - 1)
    return sigma.values[i, j]


def ipp_residuals(u: ScalarField, sigma: ScalarField, center, r: float) -> tuple[float, float]:
    """Discrete residuals of the two integration-by-parts identities on ``dB_r``.

    ``res1 = |E(r) - oint sigma u du/dnu|`` and ``res2 = |oint sigma du/dnu|``.
    Circle integrals use the trapezoid rule over ``ceil(2 pi r / h)`` nodes,
    bilinear interpolation of u and an inward one-sided difference of length h
    for the normal derivative; sigma is read in the cell holding the stencil
    midpoint.
    """
    g = u.grid
    _check_ball(g, center, r, 2 * g.h, margin=2 * g.h)
    pts, nrm, ds = circle_points(center, r, g.h)
    inner = pts - g.h * nrm
    u_out = u.interpolate(pts[:, 0], pts[:, 1])
    u_in = u.interpolate(inner[:, 0], inner[:, 1])
    dudn = (u_out - u_in) / g.h
    s = _sigma_at(sigma, pts - 0.5 * g.h * nrm)
    flux = s * dudn
    e_r = local_energy(u, sigma, center, r)
    res1 = abs(e_r - float(np.sum(flux * u_out) * ds))
    res2 = abs(float(np.sum(flux) * ds))
    return res1, res2


def normalized_dirichlet(u: ScalarField, center, r: float, p: float = 2.0) -> float:
    """``r^(1 - 4/p) (int_{B_r} |grad u|^p)^(2/p)`` in two dimensions."""
    if not (1.0 <= p <= 2.0):
        raise ParameterError(f"exponent p must lie in [1, 2], got {p}")
    g = u.grid
    _check_ball(g, center, r, 2 * g.h)
    m = g.ball_mask(center, r)
    integral = float(np.sum(np.sqrt(gradient_sq(u)[m]) ** p) * g.h**2)
    return r ** (1.0 - 4.0 / p) * integral ** (2.0 / p)


def reverse_holder_ratio(u: ScalarField, center, r: float) -> float:
    """``mean_{B_(r/2)} |grad u|^2 / (mean_{B_r} |grad u|)^2``, a scale-invariant ratio >= ~1."""
    g = u.grid
    _check_ball(g, center, r, 4 * g.h)
    g2 = gradient_sq(u)
    inner = g2[g.ball_mask(center, r / 2)]
    outer = np.sqrt(g2[g.ball_mask(center, r)])
    spread = float(u.values.max() - u.values.min())
    scale = (spread / r) ** 2 if spread > 0 else 1.0
    den = float(outer.mean()) ** 2
    if den < 1e-14 * scale:
        raise DegenerateProbeError("gradient vanishes on the ball; ratio undefined")
    return float(inner.mean()) / den
