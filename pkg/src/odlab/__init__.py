"""Two-phase optimal design: grid sets, transmission solves, shape descent,
boundary regularity probes and the weighted Wirtinger eigenvalue."""

from .elliptic import BoundaryDatum, PhaseCoefficients, solve_dirichlet, total_energy
from .errors import OdlabError
from .grid import BoundaryCurve, Grid2, IndicatorSet, ScalarField, extract_boundary
from .optimizer import OptimizerConfig, minimize

__version__ = "0.1.0"
