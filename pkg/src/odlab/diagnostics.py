"""Geometric measurements on a phase set and its boundary curve.

Every probe is a pure function of its inputs.  Radii and points are in
length units; ratios are dimensionless.
"""

from __future__ import annotations

import csv
import math
import weakref
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .elliptic import PhaseCoefficients, local_energy, normalized_dirichlet
from .errors import DegenerateProbeError, DomainError, GridError, PreconditionError
from .grid import (
    BoundaryCurve,
    IndicatorSet,
    ScalarField,
    ball_area,
    curve_length_in_ball,
    distance_transform,
    extract_boundary,
    label_components,
)

N_ANGLES = 360
N_LINE_SAMPLES = 128
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class BallProbe:
    center: tuple[float, float]
    r: float
    values: dict[str, float] = field(default_factory=dict)


def dyadic_radii(r_max: float, r_min: float) -> list[float]:
    """``r_max, r_max/2, ...`` down to ``r_min`` (inclusive, small float slack)."""
    out = []
    t = r_max
    while t >= r_min * (1 - 1e-9):
        out.append(t)
        t /= 2.0
    return out


def dyadic_up(r_min: float, r_max: float) -> list[float]:
    """``r_min, 2 r_min, ...`` up to ``r_max``."""
    out = []
    t = r_min
    while t <= r_max * (1 + 1e-9):
        out.append(t)
        t *= 2.0
    return out


# --------------------------------------------------------------------------
# Ahlfors ratios


@dataclass
class AhlforsProfile:
    points: np.ndarray
    radii: np.ndarray
    ratios: np.ndarray  # nan where skipped
    skipped: np.ndarray
    saturated: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return ~self.skipped

    @property
    def min_ratio(self) -> float:
        v = self.ratios[self.valid]
        return float(v.min()) if v.size else float("nan")

    @property
    def max_ratio(self) -> float:
        v = self.ratios[self.valid]
        return float(v.max()) if v.size else float("nan")

    @property
    def constant(self) -> float:
        """Empirical ``C_A = max(max ratio, 1 / min ratio)``."""
        lo = self.min_ratio
        return max(self.max_ratio, 1.0 / lo if lo > 0 else math.inf)


def ahlfors_profile(E: IndicatorSet, points, radii, curve: BoundaryCurve | None = None) -> AhlforsProfile:
    """``P(E; B_r(x)) / r`` for every point and radius.

    Radii below 4h or reaching the domain edge are skipped (nan).  A probe is
    flagged ``saturated`` when every loop touching the ball lies entirely
    inside it: the perimeter no longer grows with r (small isolated component).
    """
    if curve is None:
        curve = extract_boundary(E)
    g = E.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rs = np.asarray(list(radii), dtype=float)
    ratios = np.full((len(pts), len(rs)), np.nan)
    skipped = np.zeros(ratios.shape, dtype=bool)
    saturated = np.zeros(ratios.shape, dtype=bool)
    mids = curve.midpoints
    loop_of = curve.segment_loop
    for a, x in enumerate(pts):
        dist_edge = g.dist_to_boundary(x)
        d2 = np.einsum("ij,ij->i", mids - x, mids - x) if len(mids) else np.zeros(0)
        for b, r in enumerate(rs):
            if r < 4 * g.h * (1 - 1e-12) or r >= dist_edge:
                skipped[a, b] = True
                continue
            inside = d2 < r * r
            ratios[a, b] = float(curve.lengths[inside].sum()) / r
            touched = np.unique(loop_of[inside])
            saturated[a, b] = bool(touched.size) and all(
                curve.closed[k] and np.all(inside[loop_of == k]) for k in touched
            )
    return AhlforsProfile(pts, rs, ratios, skipped, saturated)


# --------------------------------------------------------------------------
# bilateral flatness


class _CurveIndex:
    """Densified curve with exact point-to-polyline distance queries."""

    def __init__(self, curve: BoundaryCurve):
        spacing = 0.5 * curve.h
        pts, sa, sb = curve.densified(spacing)
        self.points = pts
        self.sa = sa
        self.sb = sb
        self.point_tree = cKDTree(pts) if len(pts) else None
        self.mid_tree = cKDTree(0.5 * (sa + sb)) if len(sa) else None

    def points_in_ball(self, x, t: float) -> np.ndarray:
        idx = self.point_tree.query_ball_point(x, t * (1 - 1e-12))
        return self.points[np.sort(np.asarray(idx, dtype=int))]

    def distance(self, z: np.ndarray) -> np.ndarray:
        k = min(4, len(self.sa))
        _, idx = self.mid_tree.query(z, k=k)
        idx = idx.reshape(len(z), k)
        a = self.sa[idx]
        d = self.sb[idx] - a
        w = z[:, None, :] - a
        dd = np.einsum("ijk,ijk->ij", d, d)
        s = np.clip(np.einsum("ijk,ijk->ij", w, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        diff = w - s[..., None] * d
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))


_index_cache: "weakref.WeakKeyDictionary[BoundaryCurve, _CurveIndex]" = weakref.WeakKeyDictionary()


def _curve_index(curve: BoundaryCurve) -> _CurveIndex:
    idx = _index_cache.get(curve)
    if idx is None:
        idx = _CurveIndex(curve)
        _index_cache[curve] = idx
    return idx


def _bilateral(index: _CurveIndex, x, rel: np.ndarray, t: float, theta: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Bilateral expression for lines ``{<z - x, n(theta)> = c}``; theta, c of shape (A,)."""
    n = np.column_stack([-np.sin(theta), np.cos(theta)])
    proj = rel @ n.T  # (m, A)
    t1 = np.maximum(proj.max(axis=0) - c, c - proj.min(axis=0)) / t
    half = np.sqrt(np.clip(t * t - c * c, 0.0, None))
    d = np.column_stack([np.cos(theta), np.sin(theta)])
    s = np.linspace(-1.0, 1.0, N_LINE_SAMPLES)
    base = np.asarray(x, dtype=float) + c[:, None] * n  # (A, 2)
    z = base[:, None, :] + (half[:, None] * s[None, :])[..., None] * d[:, None, :]
    dist = index.distance(z.reshape(-1, 2)).reshape(len(theta), N_LINE_SAMPLES)
    t2 = np.where(half > 0, dist.max(axis=1), 0.0) / t
    return t1 + t2


def _best_offsets(index, x, rel, t, theta, around=None, iters: int = 26):
    """Per-angle offset minimization: coarse scan then golden-section refinement.

    With ``around`` (one offset per angle) the coarse scan is replaced by a
    narrow bracket of half-width 0.05 t centered there.
    """
    A = len(theta)
    if around is None:
        n = np.column_stack([-np.sin(theta), np.cos(theta)])
        proj = rel @ n.T
        pmin, pmax = proj.min(axis=0), proj.max(axis=0)
        pad = 0.05 * t
        coarse = np.linspace(0.0, 1.0, 17)
        cs = (pmin - pad)[:, None] + (pmax - pmin + 2 * pad)[:, None] * coarse[None, :]
        cs = np.clip(cs, -t, t)
        vals = np.column_stack([_bilateral(index, x, rel, t, theta, cs[:, k]) for k in range(cs.shape[1])])
        k = vals.argmin(axis=1)
        rows = np.arange(A)
        lo = cs[rows, np.maximum(k - 1, 0)]
        hi = cs[rows, np.minimum(k + 1, cs.shape[1] - 1)]
        best_c = cs[rows, k]
        best_v = vals[rows, k]
    else:
        best_c = np.asarray(around, dtype=float)
        best_v = _bilateral(index, x, rel, t, theta, best_c)
        lo = np.clip(best_c - 0.05 * t, -t, t)
        hi = np.clip(best_c + 0.05 * t, -t, t)
    c1 = hi - _GOLDEN * (hi - lo)
    c2 = lo + _GOLDEN * (hi - lo)
    f1 = _bilateral(index, x, rel, t, theta, c1)
    f2 = _bilateral(index, x, rel, t, theta, c2)
    for _ in range(iters):
        left = f1 < f2
        new_hi = np.where(left, c2, hi)
        new_lo = np.where(left, lo, c1)
        nc1 = np.where(left, new_hi - _GOLDEN * (new_hi - new_lo), c2)
        nc2 = np.where(left, c1, new_lo + _GOLDEN * (new_hi - new_lo))
        probe = np.where(left, nc1, nc2)
        fp = _bilateral(index, x, rel, t, theta, probe)
        f1, f2 = np.where(left, fp, f2), np.where(left, f1, fp)
        c1, c2, lo, hi = nc1, nc2, new_lo, new_hi
        for cc, ff in ((c1, f1), (c2, f2)):
            better = ff < best_v
            best_v = np.where(better, ff, best_v)
            best_c = np.where(better, cc, best_c)
    return best_v, best_c


def _width_bound(rel: np.ndarray, t: float, theta: np.ndarray) -> np.ndarray:
    n = np.column_stack([-np.sin(theta), np.cos(theta)])
    proj = rel @ n.T
    return (proj.max(axis=0) - proj.min(axis=0)) / (2 * t)


def _beta(curve: BoundaryCurve, x, t: float, stop_below: float | None = None, batch: int = 12):
    index = _curve_index(curve)
    if index.point_tree is None:
        raise DegenerateProbeError("empty curve")
    x = np.asarray(x, dtype=float)
    inball = index.points_in_ball(x, t)
    if len(inball) == 0:
        raise DegenerateProbeError(f"no curve points in B_{t:g}({x[0]:g}, {x[1]:g})")
    rel = inball - x
    thetas = np.pi * np.arange(N_ANGLES) / N_ANGLES
    lb = _width_bound(rel, t, thetas)
    order = np.argsort(lb, kind="stable")
    best, best_theta, best_c = math.inf, 0.0, 0.0
    if stop_below is not None:
        # quick accept: centered offsets at the narrowest directions
        first = order[:batch]
        n = np.column_stack([-np.sin(thetas[first]), np.cos(thetas[first])])
        proj = rel @ n.T
        c = 0.5 * (proj.max(axis=0) + proj.min(axis=0))
        quick = float(_bilateral(index, x, rel, t, thetas[first], c).min())
        if quick <= stop_below:
            return quick
    for start in range(0, N_ANGLES, batch):
        chunk = order[start : start + batch]
        cut = best if stop_below is None else min(best, stop_below)
        chunk = chunk[lb[chunk] < cut]
        if chunk.size == 0:
            break
        v, cbest = _best_offsets(index, x, rel, t, thetas[chunk])
        k = int(np.argmin(v))
        if v[k] < best:
            best, best_theta, best_c = float(v[k]), float(thetas[chunk[k]]), float(cbest[k])
        if stop_below is not None and best <= stop_below:
            return best
    if not math.isfinite(best):
        return best  # every angle ruled out by the width bound
    # local refinement of the angle between neighbouring grid lines, with the
    # offset tracked from the best line found so far
    step = np.pi / N_ANGLES
    lo, hi = best_theta - step, best_theta + step
    state = {"c": best_c}

    def at(th):
        th = np.array([th])
        cut = best if stop_below is None else min(best, stop_below)
        if _width_bound(rel, t, th)[0] >= cut:
            return math.inf
        v, c = _best_offsets(index, x, rel, t, th, around=[state["c"]], iters=16)
        if v[0] < best:
            state["c"] = float(c[0])
        return float(v[0])

    a = hi - _GOLDEN * (hi - lo)
    b = lo + _GOLDEN * (hi - lo)
    fa, fb = at(a), at(b)
    for _ in range(14):
        if fa < fb:
            hi, b, fb = b, a, fa
            a = hi - _GOLDEN * (hi - lo)
            fa = at(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + _GOLDEN * (hi - lo)
            fb = at(b)
        best = min(best, fa, fb)
        if stop_below is not None and best <= stop_below:
            break
    return best


def beta_number(curve: BoundaryCurve, x, t: float) -> float:
    """Bilateral flatness of the curve in ``B_t(x)``.

    Minimum over lines of ``sup dist(curve, line)/t + sup dist(line, curve)/t``
    (both sups restricted to the ball).  Lines are searched over 360 angles in
    ``[0, pi)`` with a per-angle golden-section search on the offset, then the
    best angle is refined between its grid neighbours.  The curve side uses
    vertices densified to spacing h/2; the line side uses 128 chord samples
    and exact point-to-polyline distances.
    """
    if t < 4 * curve.h * (1 - 1e-12):
        raise GridError(f"scale {t:g} below 4h = {4 * curve.h:g}")
    return min(_beta(curve, x, t), 2.0)


def beta_exceeds(curve: BoundaryCurve, x, t: float, eps: float) -> bool:
    """``beta_number(curve, x, t) > eps`` with early exit once a line achieves eps."""
    return _beta(curve, x, t, stop_below=eps) > eps


def curve_samples(curve: BoundaryCurve, spacing: float, center=None, r: float | None = None):
    """Arclength samples every ``spacing`` along each loop, with their length weights.

    Each sample sits at the middle of its arclength bin; the last bin of an
    open chain may be shorter.
    """
    pts, ws = [], []
    for lp, closed in zip(curve.loops, curve.closed):
        verts = np.vstack([lp, lp[:1]]) if closed else lp
        seg = np.hypot(*np.diff(verts, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        total = cum[-1]
        if total <= 0:
            continue
        nb = max(int(math.ceil(total / spacing - 1e-9)), 1)
        edges = np.minimum(np.arange(nb + 1) * spacing, total)
        s_mid = 0.5 * (edges[:-1] + edges[1:])
        pts.append(np.column_stack([np.interp(s_mid, cum, verts[:, 0]), np.interp(s_mid, cum, verts[:, 1])]))
        ws.append(np.diff(edges))
    if not pts:
        return np.zeros((0, 2)), np.zeros(0)
    mids, w = np.vstack(pts), np.concatenate(ws)
    if center is not None:
        d = mids - np.asarray(center, dtype=float)
        keep = np.einsum("ij,ij->i", d, d) < r * r
        mids, w = mids[keep], w[keep]
    return mids, w


def carleson_sum(curve: BoundaryCurve, eps: float, z, r: float, spacing: float | None = None) -> float:
    """Discrete Carleson box mass of ``{beta > eps}`` over ``B_r(z)``, divided by r.

    Scales are ``r, r/2, ...`` down to 8h, each weighted by ``ln 2``.  Curve
    samples in the box are spaced by ``spacing`` (default r/32).
    """
    if r < 8 * curve.h * (1 - 1e-12):
        raise GridError(f"box radius {r:g} below 8h = {8 * curve.h:g}")
    if spacing is None:
        spacing = r / 32.0
    ys, ws = curve_samples(curve, spacing, z, r)
    total = 0.0
    for t in dyadic_radii(r, 8 * curve.h):
        for y, w in zip(ys, ws):
            if beta_exceeds(curve, y, t, eps):
                total += w * math.log(2.0)
    return total / r


# --------------------------------------------------------------------------
# interior/exterior balls and densities


def phase_distances(E: IndicatorSet) -> tuple[ScalarField, ScalarField]:
    """``(distance to complement, distance to E)`` at every cell center."""
    return distance_transform(E.complement()), distance_transform(E)


def condition_b(E: IndicatorSet, x, r: float, distances=None) -> tuple[float, float]:
    """Radii of the largest E-ball and complement-ball found inside ``B_r(x)``.

    For a cell c of one phase the ball radius is
    ``min(center distance to the other phase, r - |c - x|)``; the implied
    constant is ``r / min(rho_in, rho_out)``.  A phase missing from the ball
    gives radius 0.
    """
    g = E.grid
    if r < 4 * g.h * (1 - 1e-12):
        raise GridError(f"radius {r:g} below 4h")
    if not g.contains_ball(x, r):
        raise DomainError(f"ball B_{r:g}({x[0]:g}, {x[1]:g}) leaves the domain")
    to_out, to_in = distances if distances is not None else phase_distances(E)
    X, Y = g.centers()
    dist = np.hypot(X - x[0], Y - x[1])
    m = dist < r
    slack = r - dist
    sel_in = m & E.cells
    sel_out = m & ~E.cells
    rho_in = float(np.minimum(to_out.values, slack)[sel_in].max()) if sel_in.any() else 0.0
    rho_out = float(np.minimum(to_in.values, slack)[sel_out].max()) if sel_out.any() else 0.0
    return rho_in, rho_out


def condition_b_constant(rho_in: float, rho_out: float, r: float) -> float:
    m = min(rho_in, rho_out)
    return r / m if m > 0 else math.inf


def h_density(E: IndicatorSet, x, r: float) -> float:
    """``r^-2 min(|E ∩ B_r|, |B_r \\ E|)``."""
    if r < 2 * E.grid.h * (1 - 1e-12):
        raise GridError(f"radius {r:g} below 2h")
    a_in, a_out = ball_area(E, x, r)
    return min(a_in, a_out) / (r * r)


def excess(curve: BoundaryCurve, x, r: float) -> float:
    """``r^-1 min_nu sum (1 - <nu_seg, nu>) len(seg)`` over sub-segments
    (curve densified at h/2) with midpoint in ``B_r(x)``.

    The minimum over unit vectors is attained in closed form at the direction
    of the length-weighted normal sum.
    """
    if r < 4 * curve.h * (1 - 1e-12):
        raise GridError(f"radius {r:g} below 4h")
    if len(curve.midpoints) == 0:
        raise DegenerateProbeError("empty curve")
    idx = _curve_index(curve)
    seg = idx.sb - idx.sa
    d = 0.5 * (idx.sa + idx.sb) - np.asarray(x, dtype=float)
    inside = np.einsum("ij,ij->i", d, d) < r * r
    if not inside.any():
        raise DegenerateProbeError("no boundary segments in the ball")
    seg = seg[inside]
    lens = np.hypot(seg[:, 0], seg[:, 1])
    # outward normal of a sub-segment is its tangent rotated by -90 degrees;
    # the best direction is the normalized length-weighted normal sum
    s = np.array([seg[:, 1].sum(), -seg[:, 0].sum()])
    return max(float(lens.sum()) - math.hypot(s[0], s[1]), 0.0) / r


@dataclass
class FlatBall:
    y: tuple[float, float]
    t: float
    a: float
    value: float


def find_flat_ball(curve: BoundaryCurve, u: ScalarField, x, r: float, eps: float,
                   lam: float = 0.0) -> Optional[FlatBall]:
    """Largest dyadic ball ``B_t(y)``, y on the curve in ``B_r(x)``, with
    ``excess + normalized Dirichlet energy + lam t <= eps``.

    Scales run ``r, r/2, ...`` down to 4h; at each scale candidates are
    visited by distance from x (x itself first).  Balls leaving the domain are
    skipped.  Returns None when nothing qualifies.
    """
    h = curve.h
    if r < 16 * h * (1 - 1e-12):
        raise GridError(f"radius {r:g} below 16h")
    x = np.asarray(x, dtype=float)
    verts = curve.vertices
    d = np.hypot(*(verts - x).T)
    cand = verts[d < r][np.argsort(d[d < r], kind="stable")]
    cand = np.vstack([x[None], cand])
    g = u.grid
    for t in dyadic_radii(r, 4 * h):
        for y in cand:
            if not g.contains_ball(y, t):
                continue
            try:
                v = excess(curve, y, t) + normalized_dirichlet(u, y, t, 2.0) + lam * t
            except DegenerateProbeError:
                continue
            if v <= eps:
                return FlatBall((float(y[0]), float(y[1])), t, t / r, v)
    return None


# --------------------------------------------------------------------------
# energy monotonicity and circle crossings


@dataclass
class MonotonicityProfile:
    radii: np.ndarray
    energies: np.ndarray
    normalized: np.ndarray
    gamma: float
    violations: list[tuple[int, float, float, float]]


def monotonicity_profile(u: ScalarField, sigma: ScalarField, coeff: PhaseCoefficients, x,
                         radii: Sequence[float], tol_m: float = 1e-2) -> MonotonicityProfile:
    """``r^-gamma E(r)`` with ``gamma = 2 sqrt(alpha/beta)``.

    A violation is a consecutive pair where the normalized energy drops by a
    relative margin larger than ``tol_m``; each is reported as
    ``(k, r_k, r_k+1, relative drop)``.
    """
    rs = np.asarray(list(radii), dtype=float)
    if np.any(np.diff(rs) <= 0):
        raise GridError("radii must be strictly increasing")
    gamma = coeff.gamma
    e = np.array([local_energy(u, sigma, x, r) for r in rs])
    norm = e / rs**gamma
    viol = []
    for k in range(len(rs) - 1):
        if norm[k + 1] < norm[k] * (1 - tol_m):
            viol.append((k, float(rs[k]), float(rs[k + 1]), float(1 - norm[k + 1] / norm[k])))
    return MonotonicityProfile(rs, e, norm, gamma, viol)


def decay_exponent(coeff: PhaseCoefficients) -> float:
    """``2 sqrt(alpha/beta) - 1``: energy decays like ``r^(1 + this)`` when positive."""
    return coeff.gamma - 1.0


def circle_crossings(curve: BoundaryCurve, y, s: float) -> int:
    """Transversal crossings of the polyline with the circle ``dB_s(y)``.

    Sign changes of ``|p - y| - s`` between segment endpoints, plus two for
    every segment whose endpoints are both outside while its closest point
    lies strictly inside.
    """
    y = np.asarray(y, dtype=float)
    count = 0
    for lp, closed in zip(curve.loops, curve.closed):
        a = lp
        b = np.roll(lp, -1, axis=0) if closed else lp[1:]
        if not closed:
            a = lp[:-1]
        out_a = np.hypot(*(a - y).T) >= s
        out_b = np.hypot(*(b - y).T) >= s
        count += int(np.count_nonzero(out_a != out_b))
        both = out_a & out_b
        if both.any():
            d = b[both] - a[both]
            w = y - a[both]
            dd = np.einsum("ij,ij->i", d, d)
            t = np.clip(np.einsum("ij,ij->i", w, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
            near = np.hypot(*(a[both] + t[:, None] * d - y).T)
            count += 2 * int(np.count_nonzero(near < s))
    return count


def circle_two_point_test(curve: BoundaryCurve, y, s_list: Iterable[float]) -> tuple[list[int], int]:
    counts = [circle_crossings(curve, y, s) for s in s_list]
    return counts, max(counts) if counts else 0


# --------------------------------------------------------------------------
# components


@dataclass
class PairRecord:
    i: int
    j: int
    dist: float
    min_area: float
    passes_far: bool
    passes_quant: bool


@dataclass
class DichotomyReport:
    records: list[PairRecord]
    eps0: float
    C0: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "dist", "min_area", "far", "quant"])
            for p in self.records:
                w.writerow([p.i, p.j, repr(float(p.dist)), repr(float(p.min_area)), int(p.passes_far), int(p.passes_quant)])


def component_distances(E: IndicatorSet, labels=None) -> np.ndarray:
    """Symmetric matrix of minimum cell-center distances between components."""
    if labels is None:
        labels = label_components(E)
    n = labels.count
    D = np.zeros((n, n))
    for a in range(1, n + 1):
        dt = distance_transform(IndicatorSet(E.grid, labels.label == a)).values
        for b in range(a + 1, n + 1):
            D[a - 1, b - 1] = D[b - 1, a - 1] = float(dt[labels.label == b].min())
    return D


def component_dichotomy(E: IndicatorSet, eps0: float, C0: float) -> DichotomyReport:
    """Per pair of components: far apart (``dist >= eps0``) and/or
    quantitatively separated (``dist^2 >= C0 min(|E_i|, |E_j|)``)."""
    labels = label_components(E)
    if labels.count < 2:
        return DichotomyReport([], eps0, C0)
    D = component_distances(E, labels)
    recs = []
    for a in range(labels.count):
        for b in range(a + 1, labels.count):
            d = D[a, b]
            m = float(min(labels.areas[a], labels.areas[b]))
            recs.append(PairRecord(a + 1, b + 1, d, m, d >= eps0, d * d >= C0 * m))
    return DichotomyReport(recs, eps0, C0)


def larsen_neighborhood(E: IndicatorSet, labels, i: int, C2: float) -> tuple[float, float]:
    """``(|{x in E \\ A_i : dist(x, A_i) <= C2 |A_i|^(1/2)}|, |A_i|)``."""
    mask = labels.mask(i)
    area_i = float(labels.areas[i - 1])
    dt = distance_transform(IndicatorSet(E.grid, mask)).values
    near = E.cells & ~mask & (dt <= C2 * math.sqrt(area_i))
    return float(np.count_nonzero(near)) * E.grid.h**2, area_i


# --------------------------------------------------------------------------
# elementary geometry


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(p)
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return np.hypot(*(p - a).T)
    s = np.clip((p - a) @ d / dd, 0.0, 1.0)
    return np.hypot(*(p - a - s[:, None] * d).T)


def height_bound_check(polyline) -> tuple[float, float, bool]:
    """Largest vertex distance from the chord ``[z, z']`` against
    ``sqrt(L (L - |z' - z|) / 2)``, L the polyline length."""
    pts = np.asarray(polyline, dtype=float)
    if len(pts) < 2:
        raise PreconditionError("need at least two vertices")
    z, z2 = pts[0], pts[-1]
    length = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
    chord = float(np.hypot(*(z2 - z)))
    dev = float(point_segment_distance(pts, z, z2).max())
    bound = math.sqrt(max(length * (length - chord), 0.0) / 2.0)
    return dev, bound, dev <= bound + 1e-12


def rectangle_confinement(points, center, radius: float, eta: float, tol: float
                          ) -> tuple[np.ndarray, float, bool]:
    """Strip through the center along a point of the set lying on the sphere.

    Returns ``(direction, half_width, half_width <= 3 eta radius)``.  Among
    points within ``tol`` of the sphere the farthest from the center is used.
    """
    rel = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)
    norms = np.hypot(*rel.T)
    on = np.abs(norms - radius) <= tol
    if not on.any():
        raise PreconditionError("no point of the set lies on the sphere")
    k = int(np.flatnonzero(on)[np.argmax(norms[on])])
    e = rel[k] / norms[k]
    perp = np.array([-e[1], e[0]])
    half = float(np.max(np.abs(rel @ perp)))
    return e, half, half <= 3 * eta * radius


def confinement_hypothesis(points, center, radius: float) -> float:
    """Largest ``dist([z1, z2], D)/radius`` over pairs, D the parallel diameter.

    For segments inside the ball this is the perpendicular offset of the line
    through z1, z2 from the center.
    """
    rel = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)
    worst = 0.0
    for a in range(len(rel)):
        d = rel[a + 1 :] - rel[a]
        n = np.hypot(*d.T)
        ok = n > 0
        if ok.any():
            off = np.abs(rel[a, 0] * d[ok, 1] - rel[a, 1] * d[ok, 0]) / n[ok]
            worst = max(worst, float(off.max()))
    return worst / radius


def rectangle_height(delta: float, R: float, C0: float) -> float:
    """Strip half-height ``C0 (delta^(1/4) R + R^(3/2))`` for nearby components."""
    return C0 * (delta**0.25 * R + R**1.5)


# --------------------------------------------------------------------------
# report output


def write_probes_csv(rows: Iterable[tuple], path) -> None:
    """Rows ``(probe_type, x, y, r, value, *extra)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["probe_type", "x", "y", "r", "value", "extra"])
        for row in rows:
            kind, x, y, r, value, *extra = row
            w.writerow([kind, repr(float(x)), repr(float(y)), repr(float(r)), repr(float(value)),
                        ";".join(str(e) for e in extra)])
