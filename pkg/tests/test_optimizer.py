import numpy as np
import pytest

from conftest import REFERENCE_FINAL_TOTAL
from odlab.elliptic import BoundaryDatum, PhaseCoefficients, solve_dirichlet, total_energy
from odlab.errors import ParameterError, PreconditionError
from odlab.grid import Grid2, IndicatorSet, ScalarField, disk_set
from odlab.optimizer import (
    OptimizerConfig,
    boundary_cells,
    flip_delta,
    local_optimality_violations,
    minimize,
    random_half,
)


def frozen_total(E, u, coeff, cfg):
    return total_energy(E, u, coeff, cfg.lam, cfg.v0).total


def test_config_validation():
    g = Grid2.unit(8)
    for bad in (OptimizerConfig(lam=-1), OptimizerConfig(v0=2.0), OptimizerConfig(max_outer=0)):
        with pytest.raises(ParameterError):
            bad.validate(g)


def test_flip_delta_perimeter_combinatorics():
    g = Grid2.unit(16)
    zero = ScalarField(g, np.zeros(g.shape))
    coeff = PhaseCoefficients(1, 2)
    cfg = OptimizerConfig(lam=0.0, v0=0.0)
    # straight edge: flipping a cell next to it removes 1 edge, adds 3 -> +2h
    E = IndicatorSet.from_function(g, lambda X, Y: Y < 0.5)
    assert flip_delta(E, zero, coeff, cfg, (5, 8)) == pytest.approx(2 * g.h)
    # step corner: two edges removed, two added
    cells = E.cells.copy()
    cells[:6, 8] = True
    E2 = IndicatorSet(g, cells)
    assert flip_delta(E2, zero, coeff, cfg, (6, 8)) == 0.0
    # isolated cell
    cells = np.zeros(g.shape, dtype=bool)
    cells[7, 7] = True
    assert flip_delta(IndicatorSet(g, cells), zero, coeff, cfg, (7, 7)) == pytest.approx(-4 * g.h)
    with pytest.raises(PreconditionError):
        flip_delta(E, zero, coeff, cfg, (5, 2))


@pytest.mark.parametrize("seed", range(5))
def test_flip_delta_matches_recompute(seed):
    rng = np.random.default_rng(seed)
    g = Grid2.unit(24)
    E = random_half(g, seed)
    coeff = PhaseCoefficients(1.0, float(rng.uniform(1.5, 6)))
    u = solve_dirichlet(E, coeff, BoundaryDatum.angular(2), 1e-10)
    cfg = OptimizerConfig(lam=float(rng.uniform(0, 20)), v0=float(rng.uniform(0, 1)))
    before = frozen_total(E, u, coeff, cfg)
    cand = np.argwhere(boundary_cells(E.cells))
    for i, j in cand[rng.choice(len(cand), 30, replace=False)]:
        cells = E.cells.copy()
        cells[i, j] = not cells[i, j]
        after = frozen_total(IndicatorSet(g, cells), u, coeff, cfg)
        d = flip_delta(E, u, coeff, cfg, (int(i), int(j)))
        assert d == pytest.approx(after - before, rel=1e-12, abs=1e-12 * max(abs(before), 1.0))


def test_full_domain_is_reached_with_zero_datum():
    g = Grid2.unit(32)
    cfg = OptimizerConfig(lam=1000.0, v0=1.0, seed=1)
    E, u, trace = minimize(disk_set(g, (0.5, 0.5), 0.3), PhaseCoefficients(1, 2), BoundaryDatum.zero(), cfg)
    assert E.cells.all()
    last = trace.energies[-1]
    assert last.dirichlet == 0 and last.perimeter == 0 and last.volume_penalty == pytest.approx(0, abs=1e-12)
    assert trace.reason == "converged"


def test_full_domain_is_reached_with_linear_datum():
    g = Grid2.unit(32)
    cfg = OptimizerConfig(lam=1000.0, v0=1.0, seed=2)
    E, _, trace = minimize(disk_set(g, (0.5, 0.5), 0.3), PhaseCoefficients(1, 2),
                           BoundaryDatum.linear(1, 0), cfg)
    assert E.cells.all()
    totals = [e.total for e in trace.energies]
    assert all(b <= a for a, b in zip(totals, totals[1:]))


def test_cap_is_reported():
    g = Grid2.unit(32)
    cfg = OptimizerConfig(lam=1000.0, v0=1.0, max_outer=1, flip_pass_cap=1, seed=0)
    _, _, trace = minimize(disk_set(g, (0.5, 0.5), 0.2), PhaseCoefficients(1, 2), BoundaryDatum.zero(), cfg)
    assert trace.reason == "cap"


def test_random_start_descends():
    g = Grid2.unit(32)
    cfg = OptimizerConfig(lam=5.0, v0=0.5, seed=4)
    E0 = random_half(g, 9)
    E, u, trace = minimize(E0, PhaseCoefficients(1, 3), BoundaryDatum.angular(1), cfg)
    totals = [e.total for e in trace.energies]
    assert all(b <= a for a, b in zip(totals, totals[1:]))
    assert totals[-1] < totals[0]
    if trace.reason == "converged":
        assert local_optimality_violations(E, u, PhaseCoefficients(1, 3), cfg) == []


def test_reference_run(reference_run):
    trace = reference_run["trace"]
    totals = [e.total for e in trace.energies]
    assert all(b < a for a, b in zip(totals, totals[1:]))
    assert trace.reason == "converged"
    assert abs(reference_run["E"].area - 0.5) <= 0.05
    assert totals[-1] == pytest.approx(REFERENCE_FINAL_TOTAL, abs=1e-9)
    E, u, coeff, cfg = reference_run["E"], reference_run["u"], reference_run["coeff"], reference_run["cfg"]
    assert local_optimality_violations(E, u, coeff, cfg) == []


def test_trace_csv(tmp_path, reference_run):
    p = tmp_path / "trace.csv"
    reference_run["trace"].write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "iter,dirichlet,perimeter,penalty,total,flips"
    assert len(lines) == len(reference_run["trace"].energies) + 1
    assert float(lines[-1].split(",")[4]) == reference_run["trace"].energies[-1].total
