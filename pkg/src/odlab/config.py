"""Flat ``key = value`` experiment configuration.

Defaults (the 128x128 reference experiment):

==============  ===========================================  ==========================
key             meaning                                      default
==============  ===========================================  ==========================
grid            ``nx ny h``                                  ``128 128 0.0078125``
origin          ``ox oy``                                    ``0 0``
alpha, beta     phase conductivities, alpha <= beta          ``1``, ``2``
lambda, v0      volume penalty weight and target area        ``10``, ``0.5``
datum           ``linear gx gy`` / ``angular k`` / ``zero``  ``linear 1 0``
init            ``disk`` / ``random`` / ``full`` / ``empty``  ``disk``
seed            RNG seed for init and sweep order            ``7``
max_outer       outer iteration cap                          ``50``
flip_pass_cap   sweeps per outer iteration                   ``20``
pde_tol         relative residual for the PDE solve          ``1e-10``
out             output directory                             ``out``
E_file, u_file  inputs for ``diagnose`` (u optional)         unset
probes          comma list of probe names                    ``ahlfors,h_density,condition_b,excess,beta``
stride          use every k-th boundary vertex               ``16``
radii           ``r_min r_max`` (dyadic between them)        ``0.0625 0.25``
eps0, C0        dichotomy thresholds                         ``0.1``, ``1``
eps_flat        flatness threshold for find_flat_ball         ``0.05``
a_grid          angles; numbers, ``pi`` multiples, or        ``0.1 0.5 1 pi/2 2 pi 4 5 6``
                ``linspace lo hi count``
ratios          beta/alpha list for the sweep                ``1.5 2 4 10``
n_fd            grid size of the discrete spectral oracle    ``4096``
==============  ===========================================  ==========================

Relative paths in ``E_file``/``u_file`` are resolved against the config
file's directory.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import OdlabError

PROBE_NAMES = ("ahlfors", "h_density", "condition_b", "excess", "beta", "omega", "monotonicity")
INIT_KINDS = ("disk", "random", "full", "empty")


class ConfigError(OdlabError, ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
        if key is not None:
            loc = f"{loc}, key '{key}'" if loc else f"key '{key}'"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    nx: int = 128
    ny: int = 128
    h: float = 0.0078125
    origin: tuple = (0.0, 0.0)
    alpha: float = 1.0
    beta: float = 2.0
    lam: float = 10.0
    v0: float = 0.5
    datum: tuple = ("linear", 1.0, 0.0)
    init: str = "disk"
    seed: int = 7
    max_outer: int = 50
    flip_pass_cap: int = 20
    pde_tol: float = 1e-10
    out: str = "out"
    E_file: Optional[str] = None
    u_file: Optional[str] = None
    probes: tuple = ("ahlfors", "h_density", "condition_b", "excess", "beta")
    stride: int = 16
    radii: tuple = (0.0625, 0.25)
    eps0: float = 0.1
    C0: float = 1.0
    eps_flat: float = 0.05
    a_grid: tuple = (0.1, 0.5, 1.0, math.pi / 2, 2.0, math.pi, 4.0, 5.0, 6.0)
    ratios: tuple = (1.5, 2.0, 4.0, 10.0)
    n_fd: int = 4096
    base_dir: str = field(default=".", compare=False)

    def resolve(self, name: Optional[str]) -> Optional[Path]:
        if name is None:
            return None
        p = Path(name)
        return p if p.is_absolute() else Path(self.base_dir) / p


_PI_TERM = re.compile(r"^(?:(?P<num>[0-9.eE+-]+)\*?)?pi(?:/(?P<den>[0-9.eE+-]+))?$")


def _number(tok: str) -> float:
    m = _PI_TERM.match(tok)
    if m:
        num = float(m.group("num")) if m.group("num") else 1.0
        den = float(m.group("den")) if m.group("den") else 1.0
        return num * math.pi / den
    v = float(tok)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {tok!r}")
    return v


def _floats(raw: str, count: int | None = None) -> tuple:
    vals = tuple(_number(t) for t in raw.replace(",", " ").split())
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} numbers, got {len(vals)}")
    if not vals:
        raise ValueError("expected at least one number")
    return vals


def _int(raw: str) -> int:
    v = float(raw)
    if v != int(v):
        raise ValueError(f"expected an integer, got {raw!r}")
    return int(v)


def _grid(raw):
    nx, ny, h = _floats(raw, 3)
    if nx != int(nx) or ny != int(ny):
        raise ValueError("nx and ny must be integers")
    return {"nx": int(nx), "ny": int(ny), "h": h}


def _datum(raw):
    parts = raw.split()
    kind = parts[0].lower() if parts else ""
    if kind == "linear" and len(parts) == 3:
        return {"datum": ("linear", _number(parts[1]), _number(parts[2]))}
    if kind == "angular" and len(parts) == 2:
        return {"datum": ("angular", _int(parts[1]))}
    if kind == "zero" and len(parts) == 1:
        return {"datum": ("zero",)}
    raise ValueError("expected 'linear gx gy', 'angular k' or 'zero'")


def _choice(options):
    def parse(raw):
        v = raw.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


def _probes(raw):
    names = tuple(p.strip() for p in raw.split(",") if p.strip())
    bad = [p for p in names if p not in PROBE_NAMES]
    if bad or not names:
        raise ValueError(f"unknown probe(s) {bad}; choose from {', '.join(PROBE_NAMES)}")
    return {"probes": names}


def _a_grid(raw):
    parts = raw.split()
    if parts and parts[0] == "linspace":
        if len(parts) != 4:
            raise ValueError("expected 'linspace lo hi count'")
        lo, hi = _number(parts[1]), _number(parts[2])
        return {"a_grid": tuple(float(v) for v in np.linspace(lo, hi, _int(parts[3])))}
    return {"a_grid": _floats(raw)}


_KEYS = {
    "grid": _grid,
    "origin": lambda s: {"origin": _floats(s, 2)},
    "alpha": lambda s: {"alpha": _number(s)},
    "beta": lambda s: {"beta": _number(s)},
    "lambda": lambda s: {"lam": _number(s)},
    "v0": lambda s: {"v0": _number(s)},
    "datum": _datum,
    "init": lambda s: {"init": _choice(INIT_KINDS)(s)},
    "seed": lambda s: {"seed": _int(s)},
    "max_outer": lambda s: {"max_outer": _int(s)},
    "flip_pass_cap": lambda s: {"flip_pass_cap": _int(s)},
    "pde_tol": lambda s: {"pde_tol": _number(s)},
    "out": lambda s: {"out": s},
    "E_file": lambda s: {"E_file": s},
    "u_file": lambda s: {"u_file": s},
    "probes": _probes,
    "stride": lambda s: {"stride": _int(s)},
    "radii": lambda s: {"radii": _floats(s, 2)},
    "eps0": lambda s: {"eps0": _number(s)},
    "C0": lambda s: {"C0": _number(s)},
    "eps_flat": lambda s: {"eps_flat": _number(s)},
    "a_grid": _a_grid,
    "ratios": lambda s: {"ratios": _floats(s)},
    "n_fd": lambda s: {"n_fd": _int(s)},
}

# field -> config key, for invariant errors
_FIELD_KEY = {"nx": "grid", "ny": "grid", "h": "grid", "lam": "lambda"}


def _check(cfg: ExperimentConfig, where: dict) -> None:
    def fail(fld, msg):
        key = _FIELD_KEY.get(fld, fld)
        raise ConfigError(msg, where.get(key), key)

    if cfg.nx < 4 or cfg.ny < 4:
        fail("nx", "grid needs at least 4 cells per side")
    if not cfg.h > 0:
        fail("h", "h must be positive")
    if not (cfg.alpha > 0 and cfg.beta > 0):
        fail("alpha", "alpha and beta must be positive")
    if cfg.alpha > cfg.beta:
        fail("alpha" if where.get("alpha", 0) >= where.get("beta", 0) else "beta",
             f"alpha <= beta violated ({cfg.alpha} > {cfg.beta})")
    if cfg.lam < 0:
        fail("lam", "lambda must be >= 0")
    area = cfg.nx * cfg.ny * cfg.h * cfg.h
    if not (0 <= cfg.v0 <= area * (1 + 1e-12)):
        fail("v0", f"v0 must lie in [0, {area}]")
    if cfg.max_outer < 1:
        fail("max_outer", "must be >= 1")
    if cfg.flip_pass_cap < 1:
        fail("flip_pass_cap", "must be >= 1")
    if not (0 < cfg.pde_tol <= 1e-3):
        fail("pde_tol", "must lie in (0, 1e-3]")
    if cfg.stride < 1:
        fail("stride", "must be >= 1")
    lo, hi = cfg.radii
    if not (0 < lo <= hi):
        fail("radii", "need 0 < r_min <= r_max")
    if cfg.eps0 < 0 or cfg.C0 < 0 or cfg.eps_flat < 0:
        fail("eps0" if cfg.eps0 < 0 else "C0" if cfg.C0 < 0 else "eps_flat", "must be >= 0")
    if any(not (0 < a < 2 * math.pi) for a in cfg.a_grid):
        fail("a_grid", "angles must lie in (0, 2 pi)")
    if any(q < 1 for q in cfg.ratios):
        fail("ratios", "ratios beta/alpha must be >= 1")
    if cfg.n_fd < 256 or cfg.n_fd & (cfg.n_fd - 1):
        fail("n_fd", "must be a power of two >= 256")


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    values: dict = {}
    where: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError("unknown key", lineno, key)
        if key in where:
            raise ConfigError(f"duplicate key (first set on line {where[key]})", lineno, key)
        if not raw:
            raise ConfigError("missing value", lineno, key)
        try:
            values.update(_KEYS[key](raw))
        except ValueError as exc:
            raise ConfigError(f"malformed value {raw!r}: {exc}", lineno, key) from None
        where[key] = lineno
    cfg = replace(ExperimentConfig(), base_dir=str(base_dir), **values)
    _check(cfg, where)
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from None
    return parse_config(text, base_dir=str(p.parent))


def config_keys() -> tuple:
    return tuple(_KEYS)


__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "config_keys"]
