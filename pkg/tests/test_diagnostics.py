import math

import numpy as np
import pytest

from odlab.diagnostics import (
    ahlfors_profile,
    beta_exceeds,
    beta_number,
    carleson_sum,
    circle_two_point_test,
    component_dichotomy,
    component_distances,
    condition_b,
    condition_b_constant,
    confinement_hypothesis,
    curve_samples,
    dyadic_radii,
    dyadic_up,
    excess,
    find_flat_ball,
    h_density,
    height_bound_check,
    larsen_neighborhood,
    monotonicity_profile,
    rectangle_confinement,
    rectangle_height,
    write_probes_csv,
)
from odlab.elliptic import PhaseCoefficients
from odlab.errors import DegenerateProbeError, DomainError, GridError, PreconditionError
from odlab.grid import BoundaryCurve, Grid2, IndicatorSet, ScalarField, disk_set, extract_boundary, label_components
from oracles import (
    arc_length_in_ball,
    brute_beta,
    brute_inscribed,
    brute_set_distance,
    circle_excess,
    dist_to_circle,
    dist_to_rays,
)

H = 1 / 256


def line(angle=0.0, h=H):
    d = np.array([math.cos(angle), math.sin(angle)])
    return BoundaryCurve.from_polylines([np.array([-d, d])], h, [False])


def circle(R=1.0, h=H):
    th = np.linspace(0, 2 * np.pi, int(np.ceil(2 * np.pi * R / h)), endpoint=False)
    return BoundaryCurve.from_polylines([R * np.column_stack([np.cos(th), np.sin(th)])], h, [True])


def corner(h=H):
    return BoundaryCurve.from_polylines([np.array([[-1, 0.0], [0, 0], [0, 1.0]])], h, [False])


def half_plane(n):
    return IndicatorSet.from_function(Grid2.unit(n), lambda X, Y: Y < 0.5)


def test_dyadic_helpers():
    assert dyadic_radii(0.25, 1 / 32) == [0.25, 0.125, 0.0625, 0.03125]
    assert dyadic_up(1 / 32, 0.25) == [0.03125, 0.0625, 0.125, 0.25]


# ---------------------------------------------------------------- Ahlfors


def test_ahlfors_half_plane():
    E = half_plane(256)
    prof = ahlfors_profile(E, [(0.5, 0.5), (0.3, 0.5)], [0.05, 0.1, 0.2])
    assert np.allclose(prof.ratios, 2.0, atol=2 * H / 0.05)
    assert not prof.saturated.any()
    assert prof.constant == pytest.approx(2.0, rel=0.05)


def test_ahlfors_disk_and_skips():
    g = Grid2.unit(256)
    D = disk_set(g, (0.5, 0.5), 0.25)
    prof = ahlfors_profile(D, [(0.75, 0.5)], [0.1, 2 * H, 0.3])
    assert prof.ratios[0, 0] == pytest.approx(arc_length_in_ball(0.25, 0.1) / 0.1, rel=0.05)
    # below 4h and beyond the domain edge
    assert prof.skipped[0, 1] and prof.skipped[0, 2]
    assert np.isnan(prof.ratios[0, 1])


def test_ahlfors_single_cell_saturates():
    g = Grid2.unit(64)
    cells = np.zeros(g.shape, dtype=bool)
    cells[32, 32] = True
    E = IndicatorSet(g, cells)
    prof = ahlfors_profile(E, [(32.5 * g.h, 32.5 * g.h)], [8 * g.h, 16 * g.h])
    assert prof.saturated.all()
    assert prof.ratios[0, 1] == pytest.approx(prof.ratios[0, 0] / 2)


# ---------------------------------------------------------------- beta


@pytest.mark.parametrize("angle", [0.0, math.pi / 6, math.pi / 2, 1.0])
def test_beta_straight_lines(angle):
    assert beta_number(line(angle), (0.0, 0.0), 0.2) <= 1e-3
    d = np.array([math.cos(angle), math.sin(angle)])
    assert beta_number(line(angle), 0.3 * d, 0.1) <= 1e-3


def test_beta_extracted_straight_interface():
    E = half_plane(128)
    c = extract_boundary(E)
    assert beta_number(c, (0.5, 0.5), 0.2) <= 1e-3


def test_beta_circle_vs_brute_force():
    th = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
    pts = np.column_stack([np.cos(th), np.sin(th)])
    c = circle()
    for t in (0.2, 0.5):
        ref = brute_beta(pts, dist_to_circle(), (1.0, 0.0), t)
        assert beta_number(c, (1.0, 0.0), t) == pytest.approx(ref, rel=0.1)


def test_beta_corner_vs_brute_force():
    s = np.linspace(0, 1, 5000)
    pts = np.vstack([np.column_stack([-s, 0 * s]), np.column_stack([0 * s, s])])
    fn = dist_to_rays((0, 0), [(-1, 0), (0, 1)])
    c = corner()
    for x, t in (((0.0, 0.0), 0.2), ((0.0, 0.1), 0.25)):
        b = beta_number(c, x, t)
        assert b >= 0.25
        assert b == pytest.approx(brute_beta(pts, fn, x, t), rel=0.05)


def test_beta_scale_invariance_and_cap():
    c = circle()
    b1 = beta_number(c, (1.0, 0.0), 0.3)
    s = c.transformed(2.0, (1.0, -1.0))
    b2 = beta_number(s, (3.0, -1.0), 0.6)
    assert abs(b1 - b2) <= 1e-6
    assert 0 <= beta_number(corner(), (0.0, 0.0), 0.5) <= 2.0


def test_beta_errors_and_exceeds():
    c = line()
    with pytest.raises(DegenerateProbeError):
        beta_number(c, (0.0, 0.5), 0.1)
    with pytest.raises(GridError):
        beta_number(c, (0.0, 0.0), 2 * H)
    assert not beta_exceeds(c, (0.0, 0.0), 0.2, 0.01)
    assert beta_exceeds(corner(), (0.0, 0.0), 0.2, 0.25)


# ---------------------------------------------------------------- Carleson


def test_curve_samples_spacing():
    pts, w = curve_samples(circle(), 0.01, (1.0, 0.0), 0.5)
    assert w.sum() == pytest.approx(arc_length_in_ball(1.0, 0.5), abs=0.02)
    assert np.all(w <= 0.01 + 1e-12)


def test_carleson_straight_is_zero():
    assert carleson_sum(line(), 0.05, (0.0, 0.0), 0.25) == 0.0


def test_carleson_corner_regression():
    # value committed after cross-checking the corner flatness against the dense oracle
    assert carleson_sum(corner(), 0.05, (0.0, 0.0), 0.5) == pytest.approx(2.6859453246697913, rel=1e-6)
    with pytest.raises(GridError):
        carleson_sum(corner(), 0.05, (0.0, 0.0), 4 * H)


# ---------------------------------------------------------------- condition B, densities


def test_condition_b_half_plane():
    E = half_plane(128)
    h = E.grid.h
    for r in (0.1, 0.2, 0.3):
        rin, rout = condition_b(E, (0.5, 0.5), r)
        assert rin >= r / 2 - 2 * h and rout >= r / 2 - 2 * h
    with pytest.raises(DomainError):
        condition_b(E, (0.1, 0.5), 0.2)
    with pytest.raises(GridError):
        condition_b(E, (0.5, 0.5), 2 * h)


def test_condition_b_thin_stripe_fails():
    g = Grid2.unit(64)
    cells = np.zeros(g.shape, dtype=bool)
    cells[:, 32] = True
    rin, rout = condition_b(IndicatorSet(g, cells), (0.5, 32.5 * g.h), 0.25)
    assert rin == pytest.approx(g.h)
    assert condition_b_constant(rin, rout, 0.25) == pytest.approx(16.0)


def test_condition_b_checkerboard_vs_brute():
    g = Grid2.unit(64)
    i, j = np.indices(g.shape)
    cells = ((i // 4 + j // 4) % 2) == 0
    E = IndicatorSet(g, cells)
    x, r = (0.5, 0.5), 32 * g.h
    rin, rout = condition_b(E, x, r)
    assert (rin, rout) == pytest.approx(brute_inscribed(cells, g.h, x, r), abs=1e-12)
    assert rin == pytest.approx(2 * g.h) and rout == pytest.approx(2 * g.h)
    assert condition_b_constant(rin, rout, r) == pytest.approx(16.0)


def test_condition_b_missing_phase():
    g = Grid2.unit(32)
    rin, rout = condition_b(IndicatorSet.full(g), (0.5, 0.5), 0.25)
    assert rout == 0.0 and condition_b_constant(rin, rout, 0.25) == math.inf


def test_h_density():
    g = Grid2.unit(256)
    r = 0.2
    tol = 4 * g.h / r
    assert h_density(half_plane(256), (0.5, 0.5), r) == pytest.approx(math.pi / 2, abs=tol)
    assert h_density(IndicatorSet.full(g), (0.5, 0.5), r) == 0.0
    Q = IndicatorSet.from_function(g, lambda X, Y: (X < 0.5) & (Y < 0.5))
    assert h_density(Q, (0.5, 0.5), r) == pytest.approx(math.pi / 4, abs=tol)
    with pytest.raises(GridError):
        h_density(Q, (0.5, 0.5), g.h)


# ---------------------------------------------------------------- excess, flat balls


def test_excess_examples():
    assert excess(line(0.4), (0.0, 0.0), 0.3) <= 1e-6
    assert excess(circle(), (1.0, 0.0), 0.2) == pytest.approx(circle_excess(1.0, 0.2), rel=0.05)
    assert excess(corner(), (0.0, 0.0), 0.2) > 0.2
    with pytest.raises(DegenerateProbeError):
        excess(line(), (0.0, 0.5), 0.1)


def test_find_flat_ball_straight():
    E = half_plane(64)
    g = E.grid
    c = extract_boundary(E)
    zero = ScalarField(g, np.zeros(g.shape))
    fb = find_flat_ball(c, zero, (0.5, 0.5), 0.25, 0.01)
    assert fb is not None and fb.a == 1.0 and fb.y == (0.5, 0.5)
    X, _ = g.centers()
    assert find_flat_ball(c, ScalarField(g, X), (0.5, 0.5), 0.25, 0.0) is None
    with pytest.raises(GridError):
        find_flat_ball(c, zero, (0.5, 0.5), 8 * g.h, 0.01)


def test_find_flat_ball_corner_shrinks():
    g = Grid2.unit(128)
    E = IndicatorSet.from_function(g, lambda X, Y: (X < 0.5) & (Y < 0.5))
    c = extract_boundary(E)
    zero = ScalarField(g, np.zeros(g.shape))
    fb = find_flat_ball(c, zero, (0.5, 0.5), 0.25, 0.05)
    assert fb is not None and fb.a < 1.0
    # the flat ball sits away from the corner
    assert math.hypot(fb.y[0] - 0.5, fb.y[1] - 0.5) >= fb.t * 0.5


# ---------------------------------------------------------------- monotonicity


def test_monotonicity_analytic():
    g = Grid2.unit(256)
    X, _ = g.centers()
    coeff = PhaseCoefficients(2.0, 2.0)
    sigma = ScalarField(g, np.full(g.shape, 2.0))
    x = (128.5 * g.h, 128.5 * g.h)
    prof = monotonicity_profile(ScalarField(g, X), sigma, coeff, x, dyadic_up(8 * g.h, 0.25), tol_m=1e-6)
    assert prof.gamma == 2.0 and prof.violations == []
    assert prof.normalized[-1] == pytest.approx(2 * math.pi, rel=0.01)


def test_monotonicity_detects_decrease():
    g = Grid2.unit(128)
    X, Y = g.centers()
    # energy concentrated near the center: normalized energy drops with r
    u = ScalarField(g, np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / (2 * 0.02**2)))
    sigma = ScalarField(g, np.ones(g.shape))
    prof = monotonicity_profile(u, sigma, PhaseCoefficients(1, 1), (0.5, 0.5), dyadic_up(8 * g.h, 0.25))
    assert prof.violations
    with pytest.raises(GridError):
        monotonicity_profile(u, sigma, PhaseCoefficients(1, 1), (0.5, 0.5), [0.2, 0.1])


# ---------------------------------------------------------------- two-point test


def test_circle_crossings():
    _, m = circle_two_point_test(line(), (0.0, 0.0), [0.1, 0.3, 0.5])
    assert m == 2
    counts, m = circle_two_point_test(circle(), (1.0, 0.0), [0.1, 0.3, 0.5])
    assert counts == [2, 2, 2]
    two = BoundaryCurve.from_polylines([np.array([[-1, 0.1], [1, 0.1]]), np.array([[-1, -0.1], [1, -0.1]])],
                                       H, [False, False])
    assert circle_two_point_test(two, (0.0, 0.0), [0.3])[1] == 4


# ---------------------------------------------------------------- components


def blocks(n, boxes):
    g = Grid2.unit(n)
    cells = np.zeros(g.shape, dtype=bool)
    for i0, i1, j0, j1 in boxes:
        cells[i0:i1, j0:j1] = True
    return IndicatorSet(g, cells)


def test_component_distances_vs_brute():
    E = blocks(64, [(2, 6, 2, 6), (20, 23, 4, 9), (40, 60, 40, 44), (5, 7, 50, 63)])
    lab = label_components(E)
    D = component_distances(E, lab)
    assert np.array_equal(D, D.T) and np.all(np.diag(D) == 0)
    for a in range(lab.count):
        for b in range(a + 1, lab.count):
            assert D[a, b] == brute_set_distance(lab.label == a + 1, lab.label == b + 1, E.grid.h)
    for a in range(lab.count):
        for b in range(lab.count):
            for c in range(lab.count):
                assert D[a, c] <= D[a, b] + D[b, c] + 2 * E.grid.h


def test_dichotomy_hand_fixture(tmp_path):
    # two 2x2 blocks with centers 10 cells apart on a 32-grid
    E = blocks(32, [(4, 6, 4, 6), (16, 18, 4, 6)])
    h = E.grid.h
    rep = component_dichotomy(E, eps0=0.5, C0=16.0)
    assert len(rep.records) == 1
    p = rep.records[0]
    assert p.dist == pytest.approx(11 * h) and p.min_area == pytest.approx(4 * h * h)
    assert not p.passes_far
    # (11h)^2 = 121 h^2 >= 16 * 4 h^2
    assert p.passes_quant
    assert not component_dichotomy(E, eps0=0.3, C0=40.0).records[0].passes_quant
    assert component_dichotomy(E, eps0=0.3, C0=40.0).records[0].passes_far
    out = tmp_path / "d.csv"
    rep.write_csv(out)
    assert out.read_text().splitlines()[0] == "i,j,dist,min_area,far,quant"
    assert component_dichotomy(blocks(32, [(4, 6, 4, 6)]), 0.1, 1.0).records == []


def test_larsen_neighborhood():
    E = blocks(32, [(4, 6, 4, 6), (8, 10, 4, 6), (26, 28, 26, 28)])
    lab = label_components(E)
    h = E.grid.h
    near, area = larsen_neighborhood(E, lab, 1, 2.0)
    # |A_1|^(1/2) = 2h; within 4h of A_1 lies all of the second block, none of the third
    assert area == pytest.approx(4 * h * h) and near == pytest.approx(4 * h * h)


# ---------------------------------------------------------------- elementary geometry


def test_height_bound_semicircle_and_segment():
    th = np.linspace(math.pi, 0, 4001)
    dev, bound, ok = height_bound_check(np.column_stack([np.cos(th), np.sin(th)]))
    assert dev == pytest.approx(1.0, abs=1e-6) and bound == pytest.approx(1.3392, abs=1e-3) and ok
    dev, bound, ok = height_bound_check(np.array([[0, 0], [0.5, 0], [1, 0]]))
    assert dev == 0 and bound == 0 and ok
    with pytest.raises(PreconditionError):
        height_bound_check(np.zeros((1, 2)))


def test_rectangle_confinement():
    xs = np.linspace(-0.9, 0.9, 21)
    pts = np.vstack([[[-1.0, 0.0]], np.column_stack([xs, np.full(21, 0.02)])])
    # the line through two offset points passes 0.02 from the center
    assert confinement_hypothesis(pts[1:], (0, 0), 1.0) == pytest.approx(0.02)
    e, half, ok = rectangle_confinement(pts, (0, 0), 1.0, eta=0.01, tol=1e-9)
    assert np.allclose(e, [-1.0, 0.0]) and half == pytest.approx(0.02) and ok
    bent = np.array([[-1.0, 0.0], [0.0, 0.5], [1.0, 0.0]])
    _, half, ok = rectangle_confinement(bent, (0, 0), 1.0, eta=0.1, tol=1e-9)
    assert half == pytest.approx(0.5) and not ok
    with pytest.raises(PreconditionError):
        rectangle_confinement(bent * 0.5, (0, 0), 1.0, 0.1, 1e-9)
    assert rectangle_height(16.0, 0.25, 1.0) == pytest.approx(2 * 0.25 + 0.125)


def test_probes_csv(tmp_path):
    p = tmp_path / "p.csv"
    write_probes_csv([("beta", 0.5, 0.5, 0.1, 0.02), ("ahlfors", 0.5, 0.5, 0.1, 2.0, "sat")], p)
    lines = p.read_text().splitlines()
    assert lines[0] == "probe_type,x,y,r,value,extra"
    assert lines[2].endswith(",sat")
