"""Weighted Wirtinger eigenvalue on the circle with a two-valued weight.

The weight is ``alpha`` on ``(0, a)`` and ``beta`` on ``(a, 2 pi)``.  The
first nontrivial eigenvalue is computed twice: as the smallest positive root
of the transmission determinant, and from a discrete generalized eigenproblem
on a uniform periodic grid.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import ClaimViolation, ParameterError, SearchError, SolverError

TWO_PI = 2.0 * math.pi
OMEGA_FLOOR = 1e-4
OMEGA_CEIL = 1.001
SCAN_STEP = 1e-4
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class SpectralConfig:
    alpha: float
    beta: float
    a: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("alpha and beta must be positive")
        if self.alpha > self.beta:
            raise ParameterError(f"need alpha <= beta, got {self.alpha} > {self.beta}")
        if not (0 < self.a < TWO_PI):
            raise ParameterError(f"a must lie in (0, 2 pi), got {self.a}")

    @property
    def ratio(self) -> float:
        return self.beta / self.alpha

    @property
    def classical(self) -> bool:
        return self.alpha == self.beta

    @property
    def C(self) -> float:
        if self.classical:
            raise ParameterError("C is undefined for alpha = beta; use the classical value nu1 = 1")
        r = self.ratio
        return 4.0 * r / (1.0 - r) ** 2


def bound_lower(a: float) -> float:
    return min((math.pi / a) ** 2, (math.pi / (TWO_PI - a)) ** 2)


@dataclass(frozen=True)
class SpectralResult:
    omega1: float
    nu1: float
    method: str
    bound_lower: float
    satisfied_quarter: bool
    satisfied_unit: bool

    @classmethod
    def from_omega(cls, omega: float, a: float, method: str) -> "SpectralResult":
        nu = omega * omega
        return cls(omega, nu, method, bound_lower(a), nu > 0.25, omega <= 1 + 1e-9)


def det_function(omega, cfg: SpectralConfig):
    """Determinant bracket ``-cos(2(a-pi)w) + (C+1) cos(2 pi w) - C`` (prefactor dropped)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ParameterError("omega must be positive")
    C = cfg.C
    f = -np.cos(2 * (cfg.a - math.pi) * w) + (C + 1) * np.cos(TWO_PI * w) - C
    return float(f) if f.ndim == 0 else f


def _det_prime(w, a, C):
    s = 2 * (a - math.pi)
    return s * np.sin(s * w) - TWO_PI * (C + 1) * np.sin(TWO_PI * w)


def smallest_root(cfg: SpectralConfig) -> SpectralResult:
    """Smallest positive root of the determinant in ``(1e-4, 1.001]``.

    Sign changes on a 1e-4 scan are refined with Brent's method.  Tangential
    roots (f touches 0 without crossing) are located where f' changes sign
    with |f| at rounding level there.
    """
    if cfg.classical:
        return SpectralResult.from_omega(1.0, cfg.a, "determinant")
    a, C = cfg.a, cfg.C
    n = int(round((OMEGA_CEIL - OMEGA_FLOOR) / SCAN_STEP))
    w = OMEGA_FLOOR + SCAN_STEP * np.arange(n + 1)
    f = det_function(w, cfg)
    fp = _det_prime(w, a, C)
    scale = C + 2.0
    fn = lambda x: det_function(x, cfg)  # noqa: E731

    best = math.inf
    zero = np.flatnonzero(f == 0.0)
    if zero.size:
        best = w[zero[0]]
    cross = np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)
    if cross.size:
        k = cross[0]
        best = min(best, brentq(fn, w[k], w[k + 1], xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps))
    # tangential roots: extremum of f with |f| at rounding level
    ext = np.flatnonzero(np.sign(fp[:-1]) * np.sign(fp[1:]) <= 0)
    for k in ext:
        if w[k] >= best:
            break
        lo, hi = w[k], w[min(k + 1, n)]
        if fp[k] == 0:
            x = lo
        elif hi == lo or fp[min(k + 1, n)] == 0:
            x = hi
        else:
            x = brentq(lambda t: _det_prime(t, a, C), lo, hi, xtol=ROOT_TOL)
        if abs(fn(x)) <= 1e-12 * scale:
            best = min(best, x)
            break
    if not math.isfinite(best):
        raise SearchError(f"no root of the determinant in (0, {OMEGA_CEIL}] for {cfg}")
    return SpectralResult.from_omega(float(best), a, "determinant")


# --------------------------------------------------------------------------
# discrete oracle


def _overlap_fraction(lo: np.ndarray, hi: np.ndarray, a: float) -> np.ndarray:
    """Fraction of each interval ``[lo, hi]`` (length < 2 pi) lying in ``(0, a)`` mod 2 pi."""
    total = np.zeros_like(lo)
    for shift in (-TWO_PI, 0.0, TWO_PI):
        total += np.clip(np.minimum(hi, a + shift) - np.maximum(lo, shift), 0.0, None)
    return total / (hi - lo)


def discrete_matrices(cfg: SpectralConfig, n: int, scheme: str = "interface"):
    """Periodic stiffness K and lumped mass M (diagonal) on ``n`` nodes ``t_k = k dt``.

    ``scheme="interface"`` uses the harmonic mean of the weight over each edge
    and the exact weight average over each dual cell; ``"midpoint"`` samples
    the weight at edge midpoints and nodes.
    """
    dt = TWO_PI / n
    t = dt * np.arange(n)
    al, be = cfg.alpha, cfg.beta
    if scheme == "interface":
        fe = _overlap_fraction(t, t + dt, cfg.a)
        w_edge = 1.0 / (fe / al + (1.0 - fe) / be)
        fm = _overlap_fraction(t - dt / 2, t + dt / 2, cfg.a)
        m = al * fm + be * (1.0 - fm)
    elif scheme == "midpoint":
        inside = lambda s: (np.mod(s, TWO_PI) > 0) & (np.mod(s, TWO_PI) < cfg.a)  # noqa: E731
        w_edge = np.where(inside(t + dt / 2), al, be)
        m = np.where(inside(t), al, be)
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    w_edge = w_edge / dt
    nxt = (np.arange(n) + 1) % n
    rows = np.concatenate([np.arange(n), nxt, np.arange(n), nxt])
    cols = np.concatenate([nxt, np.arange(n), np.arange(n), nxt])
    vals = np.concatenate([-w_edge, -w_edge, w_edge, w_edge])
    K = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    return K, m * dt


def discrete_eigenvalue(cfg: SpectralConfig, n: int, scheme: str = "interface",
                        tol: float = 1e-10, max_iter: int = 500) -> float:
    """Smallest nonzero eigenvalue of ``K v = nu M v``.

    Block inverse iteration (4 vectors, shift 0.1) with the constant mode
    removed M-orthogonally and Rayleigh-Ritz on the block; stops when the
    lowest Ritz value changes by less than ``tol`` relative.
    """
    if n < 256 or n & (n - 1):
        raise ParameterError(f"n must be a power of two >= 256, got {n}")
    K, mdiag = discrete_matrices(cfg, n, scheme)
    shift = 0.1
    lu = spla.splu((K + shift * sp.diags(mdiag)).tocsc())
    one = np.ones(n) / math.sqrt(mdiag.sum())

    def deflate(V):
        return V - np.outer(one, one @ (mdiag[:, None] * V))

    t = TWO_PI * np.arange(n) / n
    V = deflate(np.column_stack([np.cos(t), np.sin(t), np.cos(2 * t), np.sin(2 * t)]))
    prev = math.inf
    for _ in range(max_iter):
        V = deflate(lu.solve(mdiag[:, None] * V))
        V, _ = np.linalg.qr(V)
        A = V.T @ (K @ V)
        B = V.T @ (mdiag[:, None] * V)
        vals, vecs = sla.eigh(0.5 * (A + A.T), 0.5 * (B + B.T))
        V = V @ vecs
        nu = float(vals[0])
        if abs(nu - prev) <= tol * abs(nu):
            return nu
        prev = nu
    raise SolverError(f"inverse iteration did not converge for {cfg} at n={n}", residual=abs(nu - prev))


# --------------------------------------------------------------------------
# sweeps


def default_a_grid(count: int = 512, edge: float = 1e-3) -> np.ndarray:
    return np.linspace(edge, TWO_PI - edge, count)


def gamma_gap(ratio: float, a_grid: Sequence[float] | None = None, alpha: float = 1.0) -> float:
    """Minimum of nu1 over the angle grid for the weight ratio ``beta/alpha``.

    Raises ClaimViolation if the minimum is not above 1/4.
    """
    grid = default_a_grid() if a_grid is None else np.asarray(list(a_grid), dtype=float)
    if ratio < 1:
        raise ParameterError("ratio must be >= 1")
    gap = min(smallest_root(SpectralConfig(alpha, alpha * ratio, float(a))).nu1 for a in grid)
    if not gap > 0.25:
        raise ClaimViolation(f"min nu1 = {gap!r} <= 1/4 for ratio {ratio}")
    return gap


def wirtinger_check(samples, r: float) -> tuple[float, float, bool]:
    """``int (u - mean)^2 ds`` against ``r^2 int (du/ds)^2 ds`` on a circle of radius r.

    Samples are equally spaced in angle; the tangential derivative is
    spectral, and both integrals use the trapezoid rule.
    """
    u = np.asarray(samples, dtype=float)
    n = len(u)
    if n < 16:
        raise ParameterError("need at least 16 samples")
    ds = TWO_PI * r / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    du_dtheta = np.real(np.fft.ifft(1j * k * np.fft.fft(u)))
    lhs = float(np.sum((u - u.mean()) ** 2) * ds)
    rhs = float(r * r * np.sum((du_dtheta / r) ** 2) * ds)
    return lhs, rhs, lhs <= rhs * (1 + 1e-6) + 1e-12


@dataclass
class SweepRow:
    a: float
    ratio: float
    omega1_det: float
    omega1_fd: float
    nu1: float
    bound_lower: float
    quarter_ok: bool
    unit_ok: bool
    error: str = ""

    @property
    def rel_gap(self) -> float:
        return abs(self.omega1_det ** 2 - self.omega1_fd ** 2) / self.omega1_det ** 2


def sweep_row(a: float, ratio: float, n: int = 4096, alpha: float = 1.0) -> SweepRow:
    cfg = SpectralConfig(alpha, alpha * ratio, a)
    try:
        det = smallest_root(cfg)
        nu_fd = discrete_eigenvalue(cfg, n)
    except (SearchError, SolverError) as exc:
        nan = float("nan")
        return SweepRow(a, ratio, nan, nan, nan, bound_lower(a), False, False, str(exc))
    return SweepRow(a, ratio, det.omega1, math.sqrt(nu_fd), det.nu1, det.bound_lower,
                    det.satisfied_quarter, det.satisfied_unit)


def thread_count() -> int:
    """``ODLAB_THREADS`` (0 or unset = one per CPU)."""
    raw = os.environ.get("ODLAB_THREADS", "0").strip() or "0"
    try:
        k = int(raw)
    except ValueError as exc:
        raise ParameterError(f"ODLAB_THREADS must be an integer, got {raw!r}") from exc
    if k < 0:
        raise ParameterError("ODLAB_THREADS must be >= 0")
    return k or (os.cpu_count() or 1)


def sweep(a_values: Iterable[float], ratios: Iterable[float], n: int = 4096,
          alpha: float = 1.0, threads: int | None = None) -> list[SweepRow]:
    """Rows in ratio-major order; parallel evaluation, ordered collection."""
    pairs = [(float(a), float(q)) for q in ratios for a in a_values]
    workers = thread_count() if threads is None else max(threads, 1)
    if workers == 1:
        return [sweep_row(a, q, n, alpha) for a, q in pairs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: sweep_row(p[0], p[1], n, alpha), pairs))


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a", "ratio", "omega1_det", "omega1_fd", "nu1", "bound_lower", "quarter_ok", "unit_ok"])
        for r in rows:
            nums = (r.a, r.ratio, r.omega1_det, r.omega1_fd, r.nu1, r.bound_lower)
            w.writerow([repr(float(v)) for v in nums] + [int(r.quarter_ok), int(r.unit_ok)])
