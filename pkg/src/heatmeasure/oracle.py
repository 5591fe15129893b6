"""Reference fields: Fourier heat solution for point sources and manufactured data.

On the unit interval with homogeneous Dirichlet conditions, the state driven by
a unit point source released at (x0, t0) expands into sine modes,

    y(x, t) = sum_n 2 sin(n pi x0) sin(n pi x) exp(-n^2 pi^2 (t - t0)),  t > t0,

and vanishes for t <= t0.  The series is truncated once the exponential tail
bound drops below 1e-14.  Desired states are produced by sampling a field on
the dual time grid (interval midpoints), either directly from the Fourier
solution or with a polynomial adjoint correction subtracted, which makes the
exact minimizer of the control problem known in advance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import SpaceTimeGrid

__all__ = [
    "PointSource",
    "DesiredState",
    "fourier_heat_dirac",
    "sample_desired_state",
    "manufactured_adjoint",
    "manufactured_desired_state",
]

TAIL_BOUND = 1e-14
DEFAULT_N_TERMS = 200


@dataclass(frozen=True)
class PointSource:
    """Unit-interval point source: weight * delta at (x0, t0)."""

    x0: float
    t0: float
    weight: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.weight):
            raise ValueError("point source weight must be finite")


@dataclass(frozen=True)
class DesiredState:
    """Coefficients y_d(x_j, (t_{k-1} + t_k)/2) on the dual grid.

    values has shape (N_h, N_tau); flat() gives the time-major vector matching
    the state coefficient layout of the discrete systems.
    """

    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes, self.grid.n_steps):
            raise ValueError(
                f"desired state must have shape ({self.grid.n_nodes}, "
                f"{self.grid.n_steps}), got {vals.shape}"
            )
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)

    def flat(self) -> np.ndarray:
        return self.values.T.ravel()


def _terms_needed(dt_min: float, n_terms: int) -> int:
    """Smallest mode count whose tail bound 2 exp(-n^2 pi^2 dt) is negligible."""
    if dt_min <= 0.0:
        return n_terms
    need = math.sqrt(max(math.log(2.0 / TAIL_BOUND), 0.0) / (math.pi**2 * dt_min))
    return int(min(n_terms, max(1, math.ceil(need) + 1)))


def fourier_heat_dirac(src: PointSource, x, t, n_terms: int = DEFAULT_N_TERMS):
    """Heat state of a point source on (0, 1), evaluated at (x, t).

    Accepts scalars or broadcastable arrays.  Values at t <= t0 are zero;
    sampling exactly at the release point returns the truncated partial sum,
    so callers must keep sample times strictly above t0.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    x, t = np.broadcast_arrays(x, t)
    dt = t - src.t0
    live = dt > 0.0
    out = np.zeros(dt.shape)
    if np.any(live):
        dts = dt[live]
        n_used = _terms_needed(float(dts.min()), n_terms)
        n = np.arange(1, n_used + 1)
        modes = 2.0 * np.sin(n * np.pi * src.x0)
        # (points, modes) products; fine at the sizes the samplers use
        decay = np.exp(-np.outer(dts, n**2 * np.pi**2))
        shapes = np.sin(np.outer(x[live], n) * np.pi)
        out[live] = (shapes * decay) @ modes
    out *= src.weight
    if out.ndim == 0:
        return float(out)
    return out


def sample_desired_state(grid: SpaceTimeGrid, field) -> DesiredState:
    """Sample a space-time field at (x_j, interval midpoint) pairs.

    field must accept broadcastable arrays (x, t).  Non-finite samples raise
    with the offending indices named.
    """
    xg, tg = np.meshgrid(grid.x, grid.t_mid, indexing="ij")
    vals = np.asarray(field(xg, tg), dtype=float)
    if not np.all(np.isfinite(vals)):
        j, k = np.argwhere(~np.isfinite(vals))[0]
        raise ValueError(
            f"desired state sample is not finite at node j={j}, interval k={k + 1} "
            f"(x={grid.x[j]}, t={grid.t_mid[k]})"
        )
    return DesiredState(grid=grid, values=vals)


def manufactured_adjoint(alpha_bar: float, x, t):
    """Polynomial adjoint with peak value -alpha_bar at (1/2, 1/2), and its heat residual.

    Returns (w, Lw) with Lw = -dw/dt - d2w/dx2 in closed form.  The shape is
    the quartic bump ((t-1/2)^2 - 1)^2 ((2x-1)^2 - 1)^2 scaled so that the
    extreme value equals -alpha_bar; it vanishes whenever (2x-1)^2 = 1 or
    (t-1/2)^2 = 1.
    """
    if alpha_bar <= 0.0:
        raise ValueError("alpha_bar must be positive")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    s = 2.0 * x - 1.0
    r = t - 0.5
    f = (s**2 - 1.0) ** 2
    g = (r**2 - 1.0) ** 2
    w = -alpha_bar * g * f
    dg = 4.0 * r * (r**2 - 1.0)
    d2f = 48.0 * s**2 - 16.0
    residual = alpha_bar * (dg * f + g * d2f)
    return w, residual


def manufactured_desired_state(
    grid: SpaceTimeGrid,
    alpha_bar: float,
    src: PointSource,
    n_terms: int = DEFAULT_N_TERMS,
    p: float = 4.0,
) -> DesiredState:
    """Desired state whose exact minimizer is the given point source.

    Subtracts |Lw|^{p-2} Lw of the manufactured adjoint from the Fourier state
    of the source, sampled on the dual grid.  With the default p = 4 the
    correction is (Lw)^3 pointwise.
    """

    def field(x, t):
        y = fourier_heat_dirac(src, x, t, n_terms)
        _, lw = manufactured_adjoint(alpha_bar, x, t)
        return y - np.abs(lw) ** (p - 2.0) * lw

    return sample_desired_state(grid, field)
