"""Run configuration: TOML/JSON parsing and validation for the CLI."""

from __future__ import annotations

import json
import pathlib

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import ControlRegion, GridError, SpaceTimeGrid, build_grid, equidistant_time_points
from .newton import SolverConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "grid_from_config", "EXAMPLE_CONFIG"]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class GridConfig:
    a: float = 0.0
    b: float = 1.0
    T: float = 1.5
    n_nodes: int = 3
    n_steps: Optional[int] = None
    coupling: str = "tau=h/2"
    time_points: Optional[list] = None
    control_region: ControlRegion = field(
        default_factory=lambda: ControlRegion(0.25, 0.75, 0.25, 1.25)
    )


@dataclass
class DataConfig:
    source: str = "fourier-dirac"  # fourier-dirac | manufactured | file
    x0: float = 0.5
    t0: float = 0.5
    weight: float = 1.0
    n_terms: int = 200
    alpha_bar: float = 0.25
    path: Optional[str] = None


@dataclass
class RunConfig:
    grid: GridConfig
    scheme: str  # vd | dg | both
    alpha: Optional[list]  # penalty values (descending for sweeps); None = auto sweep
    beta: Optional[float]
    q: float
    data: DataConfig
    solver: SolverConfig
    out_dir: str

    @property
    def schemes(self):
        return ["vd", "dg"] if self.scheme == "both" else [self.scheme]


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section [{name}] must be a table")
    return sec


def load_config(path) -> RunConfig:
    """Read a TOML (default) or JSON run file."""
    p = pathlib.Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    if p.suffix == ".json":
        raw = json.loads(p.read_text())
    else:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    g = _section(raw, "grid")
    region_raw = g.get("control_region", {})
    region = ControlRegion(
        x_lo=float(region_raw.get("x_lo", 0.25)),
        x_hi=float(region_raw.get("x_hi", 0.75)),
        t_lo=float(region_raw.get("t_lo", 0.25)),
        t_hi=float(region_raw.get("t_hi", 1.25)),
    )
    coupling = g.get("coupling", "tau=h/2")
    if coupling not in ("tau=h/2", "tau=h^2/2", "explicit"):
        raise ConfigError(f"unknown coupling {coupling!r}")
    grid_cfg = GridConfig(
        a=float(g.get("a", 0.0)),
        b=float(g.get("b", 1.0)),
        T=float(g.get("T", 1.5)),
        n_nodes=int(g.get("Nh", 3)),
        n_steps=int(g["Ntau"]) if "Ntau" in g else None,
        coupling=coupling,
        time_points=list(g["time_points"]) if "time_points" in g else None,
        control_region=region,
    )

    prob = _section(raw, "problem")
    scheme = prob.get("scheme", "both")
    if scheme not in ("vd", "dg", "both"):
        raise ConfigError(f"scheme must be vd, dg or both, got {scheme!r}")
    alpha_raw = prob.get("alpha", 0.456)
    if alpha_raw == "auto":
        alpha = None  # sweeps generate their own descending grid
    else:
        alpha = [float(a) for a in (alpha_raw if isinstance(alpha_raw, list) else [alpha_raw])]
        if any(a < 0.0 for a in alpha):
            raise ConfigError("alpha values must be nonnegative")
    beta_raw = prob.get("beta", "disabled")
    if beta_raw == "disabled" or beta_raw is None:
        beta = None
    else:
        beta = float(beta_raw)
        if beta <= 0.0:
            raise ConfigError("beta must be positive or 'disabled'")
    q = float(prob.get("q", 4.0 / 3.0))
    if not (1.0 < q <= 2.0):
        raise ConfigError(f"q must lie in (1, 2], got {q}")

    d = _section(raw, "data")
    data = DataConfig(
        source=d.get("source", "fourier-dirac"),
        x0=float(d.get("x0", 0.5)),
        t0=float(d.get("t0", 0.5)),
        weight=float(d.get("weight", 1.0)),
        n_terms=int(d.get("n_terms", 200)),
        alpha_bar=float(d.get("alpha_bar", 0.25)),
        path=d.get("path"),
    )
    if data.source not in ("fourier-dirac", "manufactured", "file"):
        raise ConfigError(f"unknown data source {data.source!r}")
    if data.source == "file" and not data.path:
        raise ConfigError("data source 'file' requires a path")

    s = _section(raw, "solver")
    solver = SolverConfig(
        kappa=float(s.get("kappa", 1.0)),
        newton_tol=float(s.get("newton_tol", 1e-10)),
        feas_tol=float(s.get("feas_tol", 1e-9)),
        max_iter=int(s.get("max_iter", 200)),
        reg_coeff=float(s.get("reg_coeff", 1.0)),
        globalization=bool(s.get("globalization", True)),
    )

    out_dir = _section(raw, "output").get("dir", "out")
    return RunConfig(
        grid=grid_cfg,
        scheme=scheme,
        alpha=alpha,
        beta=beta,
        q=q,
        data=data,
        solver=solver,
        out_dir=out_dir,
    )


def grid_from_config(cfg: GridConfig) -> SpaceTimeGrid:
    """Materialize the grid, resolving the tau-h coupling."""
    h = (cfg.b - cfg.a) / (cfg.n_nodes + 1)
    if cfg.coupling == "explicit":
        if cfg.time_points is not None:
            t = np.asarray(cfg.time_points, dtype=float)
        elif cfg.n_steps is not None:
            t = equidistant_time_points(cfg.T, cfg.n_steps)
        else:
            raise ConfigError("coupling 'explicit' needs time_points or Ntau")
    else:
        tau = h / 2.0 if cfg.coupling == "tau=h/2" else h * h / 2.0
        steps = cfg.T / tau
        n_steps = int(round(steps))
        if abs(steps - n_steps) > 1e-9 or n_steps < 1:
            raise ConfigError(
                f"coupling {cfg.coupling} gives a non-integer step count "
                f"{steps} for T={cfg.T}, h={h}"
            )
        if cfg.n_steps is not None and cfg.n_steps != n_steps:
            raise ConfigError(
                f"Ntau={cfg.n_steps} conflicts with coupling {cfg.coupling} "
                f"(expects {n_steps})"
            )
        t = equidistant_time_points(cfg.T, n_steps)
    try:
        return build_grid(cfg.a, cfg.b, cfg.T, cfg.n_nodes, t)
    except GridError as exc:
        raise ConfigError(str(exc)) from exc


EXAMPLE_CONFIG = """\
# Example run file.  All sections are optional; the values below are the
# defaults for the coarse source-identification setup.

[grid]
a = 0.0
b = 1.0
T = 1.5
Nh = 3                 # interior nodes, so h = (b - a) / (Nh + 1)
coupling = "tau=h/2"   # "tau=h/2" | "tau=h^2/2" | "explicit"
# Ntau = 12            # optional cross-check (or required with "explicit")
# time_points = [...]  # fully explicit time grid with coupling = "explicit"

[grid.control_region]
x_lo = 0.25
x_hi = 0.75
t_lo = 0.25
t_hi = 1.25

[problem]
scheme = "both"        # "vd" | "dg" | "both"
alpha = 0.456          # a value, a descending list, or "auto" (sweeps only)
beta = "disabled"      # "disabled" drops the initial-measure term, or a float
q = 1.3333333333333333

[data]
source = "fourier-dirac"   # "fourier-dirac" | "manufactured" | "file"
x0 = 0.5
t0 = 0.5
weight = 1.0
n_terms = 200
# alpha_bar = 0.25         # manufactured data only
# path = "yd.csv"          # file source only

[solver]
kappa = 1.0
newton_tol = 1e-10
feas_tol = 1e-9
max_iter = 200
reg_coeff = 1.0
globalization = true

[output]
dir = "out"
"""
