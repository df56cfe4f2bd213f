"""``odlab solve|diagnose|spectral --config <path> [--out <dir>]``.

Exit codes: 0 ok, 2 input error, 3 iteration cap reached, 4 solver failure,
5 a computed quantity contradicts a known bound.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import diagnostics as dg
from . import spectral
from .config import ConfigError, ExperimentConfig, load_config
from .elliptic import BoundaryDatum, PhaseCoefficients, normalized_dirichlet, solve_dirichlet
from .errors import ClaimViolation, DegenerateProbeError, FormatError, GridError, OdlabError, ParameterError, SolverError
from .grid import Grid2, IndicatorSet, extract_boundary
from .io import read_field_raw, read_indicator, write_field_raw, write_pgm
from .optimizer import OptimizerConfig, disk_of_area, minimize, random_half

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CAP = 3
EXIT_SOLVER = 4
EXIT_CLAIM = 5

log = logging.getLogger("odlab")


def _grid(cfg: ExperimentConfig) -> Grid2:
    return Grid2(cfg.nx, cfg.ny, cfg.h, tuple(cfg.origin))


def _datum(cfg: ExperimentConfig) -> BoundaryDatum:
    kind = cfg.datum[0]
    if kind == "linear":
        return BoundaryDatum.linear(cfg.datum[1], cfg.datum[2])
    if kind == "angular":
        return BoundaryDatum.angular(cfg.datum[1])
    return BoundaryDatum.zero()


def initial_set(cfg: ExperimentConfig) -> IndicatorSet:
    g = _grid(cfg)
    if cfg.init == "disk":
        return disk_of_area(g, cfg.v0)
    if cfg.init == "random":
        return random_half(g, cfg.seed)
    if cfg.init == "full":
        return IndicatorSet.full(g)
    return IndicatorSet.empty(g)


def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    coeff = PhaseCoefficients(cfg.alpha, cfg.beta)
    ocfg = OptimizerConfig(cfg.lam, cfg.v0, cfg.max_outer, cfg.pde_tol, cfg.flip_pass_cap, cfg.seed)
    E, u, trace = minimize(initial_set(cfg), coeff, _datum(cfg), ocfg)
    out.mkdir(parents=True, exist_ok=True)
    write_pgm(E, out / "E.pgm")
    write_field_raw(u, out / "u.f64")
    trace.write_csv(out / "trace.csv")
    last = trace.energies[-1]
    log.info("%s after %d iterates: total %.12g (area %.6g)", trace.reason, len(trace.energies) - 1,
             last.total, last.area)
    return EXIT_CAP if trace.reason == "cap" else EXIT_OK


def _probe_rows(cfg: ExperimentConfig, E: IndicatorSet, u, coeff: PhaseCoefficients):
    g = E.grid
    curve = extract_boundary(E)
    points = curve.vertices[:: cfg.stride]
    radii = dg.dyadic_up(*cfg.radii)
    rows = []
    probes = set(cfg.probes)
    if "ahlfors" in probes:
        prof = dg.ahlfors_profile(E, points, radii, curve)
        for a, x in enumerate(prof.points):
            for b, r in enumerate(prof.radii):
                if not prof.skipped[a, b]:
                    rows.append(("ahlfors_ratio", x[0], x[1], r, prof.ratios[a, b],
                                 "saturated" if prof.saturated[a, b] else ""))
    dist = dg.phase_distances(E) if "condition_b" in probes else None
    sigma = coeff.sigma(E) if u is not None else None
    for x in points:
        inner = [r for r in radii if r < g.dist_to_boundary(x)]
        for r in inner:
            try:
                if "h_density" in probes and r >= 2 * g.h:
                    rows.append(("h_density", x[0], x[1], r, dg.h_density(E, x, r)))
                if "condition_b" in probes and r >= 4 * g.h:
                    rin, rout = dg.condition_b(E, x, r, dist)
                    rows.append(("conditionB_inner", x[0], x[1], r, rin))
                    rows.append(("conditionB_outer", x[0], x[1], r, rout))
                if "excess" in probes and r >= 4 * g.h:
                    rows.append(("excess", x[0], x[1], r, dg.excess(curve, x, r)))
                if "beta" in probes and r >= 4 * g.h:
                    rows.append(("beta", x[0], x[1], r, dg.beta_number(curve, x, r)))
                if "omega" in probes and u is not None:
                    rows.append(("omega", x[0], x[1], r, normalized_dirichlet(u, x, r, 2.0)))
            except DegenerateProbeError as exc:
                log.debug("skipping probe at (%g, %g), r=%g: %s", x[0], x[1], r, exc)
        if "monotonicity" in probes and u is not None and len(inner) >= 2:
            prof = dg.monotonicity_profile(u, sigma, coeff, x, inner)
            bad = {k for k, *_ in prof.violations}
            for k, r in enumerate(inner):
                rows.append(("monotonicity", x[0], x[1], r, prof.normalized[k],
                             "drop" if k in bad else ""))
    return rows


def cmd_diagnose(cfg: ExperimentConfig, out: Path) -> int:
    E_path = cfg.resolve(cfg.E_file)
    if E_path is None:
        raise ConfigError("diagnose needs an input set", key="E_file")
    try:
        E = read_indicator(E_path, h=cfg.h, origin=tuple(cfg.origin))
    except OSError as exc:
        raise FormatError(f"cannot read {E_path}: {exc}") from None
    coeff = PhaseCoefficients(cfg.alpha, cfg.beta)
    u = None
    if cfg.u_file is not None:
        try:
            u = read_field_raw(cfg.resolve(cfg.u_file))
        except OSError as exc:
            raise FormatError(f"cannot read {cfg.u_file}: {exc}") from None
        if u.grid != E.grid:
            raise FormatError(f"field grid {u.grid} does not match set grid {E.grid}")
    elif {"omega", "monotonicity"} & set(cfg.probes):
        u = solve_dirichlet(E, coeff, _datum(cfg), cfg.pde_tol)
    rows = _probe_rows(cfg, E, u, coeff)
    out.mkdir(parents=True, exist_ok=True)
    dg.write_probes_csv(rows, out / "probes.csv")
    dg.component_dichotomy(E, cfg.eps0, cfg.C0).write_csv(out / "dichotomy.csv")
    log.info("wrote %d probe rows", len(rows))
    return EXIT_OK


def cmd_spectral(cfg: ExperimentConfig, out: Path) -> int:
    rows = spectral.sweep(cfg.a_grid, cfg.ratios, cfg.n_fd, alpha=1.0)
    out.mkdir(parents=True, exist_ok=True)
    spectral.write_sweep_csv(rows, out / "sweep.csv")
    bad = [r for r in rows if r.error or not (r.quarter_ok and r.unit_ok)]
    for r in bad:
        log.error("row a=%r ratio=%r violates a bound%s", r.a, r.ratio, f": {r.error}" if r.error else "")
    gap = max((r.rel_gap for r in rows if not r.error), default=0.0)
    log.info("%d rows, largest determinant/discrete relative gap %.3g", len(rows), gap)
    return EXIT_CLAIM if bad else EXIT_OK


COMMANDS = {"solve": cmd_solve, "diagnose": cmd_diagnose, "spectral": cmd_spectral}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="odlab", description="Two-phase optimal design experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="key = value configuration file")
    p.add_argument("--out", help="output directory (overrides the config's 'out')")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        spectral.thread_count()
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg.resolve(cfg.out)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, FormatError, GridError, ParameterError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except ClaimViolation as exc:
        log.error("bound violated: %s", exc)
        return EXIT_CLAIM
    except SolverError as exc:
        log.error("solver failure: %s (residual %.3g)", exc, exc.residual)
        return EXIT_SOLVER
    except OdlabError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
