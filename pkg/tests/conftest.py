import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from odlab.elliptic import BoundaryDatum, PhaseCoefficients
from odlab.grid import Grid2
from odlab.optimizer import OptimizerConfig, disk_of_area, minimize

# committed after the first verified run of the 128x128 reference experiment
REFERENCE_FINAL_TOTAL = 4.623949647433083


def layered_exact(alpha, beta, x_interface=0.5):
    """1-D transmission profile with u(0) = 0, u(1) = 1, interface at x_interface."""
    a, b, s = alpha, beta, x_interface
    q = 1.0 / (s / a + (1 - s) / b)

    def fn(X, Y):
        return np.where(X < s, q * X / a, q * s / a + q * (X - s) / b)
    return fn


def reference_problem():
    g = Grid2.unit(128)
    coeff = PhaseCoefficients(1.0, 2.0)
    datum = BoundaryDatum.linear(1.0, 0.0)
    cfg = OptimizerConfig(lam=10.0, v0=0.5, seed=7)
    return disk_of_area(g, 0.5), coeff, datum, cfg


@pytest.fixture(scope="session")
def reference_run():
    E0, coeff, datum, cfg = reference_problem()
    E, u, trace = minimize(E0, coeff, datum, cfg)
    return {"E0": E0, "E": E, "u": u, "trace": trace, "coeff": coeff, "datum": datum, "cfg": cfg}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
