"""Tensor-product space-time grids on (a,b) x (0,T) and control-region index sets.

The spatial mesh consists of equidistant interior nodes x_1 < ... < x_{N_h}
(homogeneous Dirichlet boundary nodes are excluded).  The time axis is split
into intervals I_k = (t_{k-1}, t_k] for k < N_tau and I_{N_tau} open at the
right end, so the intervals cover all of (0, T).  Controls live on a closed
space-time box (x_lo, x_hi) x (t_lo, t_hi) compactly contained in the domain;
membership of grid points in its closure is decided exactly in rational
arithmetic whenever the coordinates are exactly representable, with a tiny
relative tolerance as fallback.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "SpaceTimeGrid",
    "ControlRegion",
    "IndexSets",
    "GridError",
    "build_grid",
    "equidistant_time_points",
    "control_index_sets",
]


class GridError(ValueError):
    """Invalid grid construction or a grid too coarse for the control region."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Immutable space-time mesh.

    Attributes
    ----------
    a, b : float
        Spatial interval bounds.
    T : float
        Final time.
    x : ndarray, shape (N_h,)
        Interior node coordinates, strictly increasing, all in (a, b).
    t : ndarray, shape (N_tau + 1,)
        Time points with t[0] = 0 and t[-1] = T, strictly increasing.
    """

    a: float
    b: float
    T: float
    x: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        self.x.setflags(write=False)
        self.t.setflags(write=False)
        if self.x.size < 1:
            raise GridError("need at least one interior node")
        if np.any(np.diff(self.x) <= 0) or self.x[0] <= self.a or self.x[-1] >= self.b:
            raise GridError("interior nodes must be strictly increasing inside (a, b)")
        if self.t[0] != 0.0 or self.t[-1] != self.T or np.any(np.diff(self.t) <= 0):
            raise GridError("time points must increase strictly from 0 to T")

    @property
    def n_nodes(self) -> int:
        return self.x.size

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def tau(self) -> np.ndarray:
        """Step sizes tau[k] = t_{k+1} - t_k, k = 0..N_tau-1."""
        return np.diff(self.t)

    @property
    def h(self) -> float:
        """Maximum element diameter, boundary elements included."""
        nodes = np.concatenate(([self.a], self.x, [self.b]))
        return float(np.max(np.diff(nodes)))

    @property
    def t_mid(self) -> np.ndarray:
        """Midpoints of the time intervals (the dual sampling grid)."""
        return 0.5 * (self.t[:-1] + self.t[1:])

    def element_lengths(self) -> np.ndarray:
        """Lengths of the N_h + 1 spatial elements."""
        nodes = np.concatenate(([self.a], self.x, [self.b]))
        return np.diff(nodes)


@dataclass(frozen=True)
class ControlRegion:
    """Closed control box [x_lo, x_hi] x [t_lo, t_hi], compactly inside the domain."""

    x_lo: float
    x_hi: float
    t_lo: float
    t_hi: float

    def validate(self, grid: SpaceTimeGrid) -> None:
        if not (grid.a < self.x_lo < self.x_hi < grid.b):
            raise GridError(
                f"control region [{self.x_lo}, {self.x_hi}] must lie strictly "
                f"inside ({grid.a}, {grid.b})"
            )
        if not (0.0 < self.t_lo < self.t_hi < grid.T):
            raise GridError(
                f"control interval [{self.t_lo}, {self.t_hi}] must lie strictly "
                f"inside (0, {grid.T})"
            )


@dataclass(frozen=True)
class IndexSets:
    """Grid indices meeting the control region (all 0-based).

    space : node indices j with x_j in the closed spatial box.
    spacetime : pairs (j, k) with (x_j, t_k) in the closed box; k is a time-point
        index, 0 <= k <= N_tau.  Since t_hi < T, k = N_tau never occurs.
    intervals : indices i such that the closure of the interval
        (t[i], t[i+1]) is contained in the closed time window; i is 0-based,
        entry i standing for the (i+1)-th time interval.
    """

    space: np.ndarray
    spacetime: list  # list of (j, k) tuples, lexicographically sorted
    intervals: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "space", np.asarray(self.space, dtype=int))
        object.__setattr__(self, "intervals", np.asarray(self.intervals, dtype=int))
        self.space.setflags(write=False)
        self.intervals.setflags(write=False)


def equidistant_time_points(T: float, n_steps: int) -> np.ndarray:
    """Equidistant partition 0 = t_0 < ... < t_{n_steps} = T."""
    if n_steps < 1:
        raise GridError("n_steps must be at least 1")
    return np.linspace(0.0, T, n_steps + 1)


def build_grid(a: float, b: float, T: float, n_nodes: int, time_points) -> SpaceTimeGrid:
    """Space-time grid with equidistant interior nodes and explicit time points.

    Nodes are x_j = a + j (b - a) / (n_nodes + 1), j = 1..n_nodes, so the
    Dirichlet boundary nodes a and b are excluded.  The time grid is taken as
    given, which lets callers realize any coupling between tau and h.
    """
    if n_nodes < 1:
        raise GridError("n_nodes must be at least 1")
    if b <= a:
        raise GridError("need a < b")
    j = np.arange(1, n_nodes + 1, dtype=float)
    x = a + j * (b - a) / (n_nodes + 1)
    t = np.asarray(time_points, dtype=float)
    return SpaceTimeGrid(a=float(a), b=float(b), T=float(T), x=x, t=t)


def _exact_coords(values: np.ndarray, exact: list) -> bool:
    """True when the stored doubles equal the intended rationals exactly."""
    return all(Fraction(float(v)) == e for v, e in zip(values, exact))


def membership_tol(grid: SpaceTimeGrid) -> tuple:
    """Comparison tolerances (space, time) for region membership.

    Zero when the grid coordinates are exactly representable (all dyadic
    setups), otherwise a 1e-12 relative band to absorb roundoff in the
    node construction.
    """
    fa, fb = Fraction(grid.a), Fraction(grid.b)
    n = grid.n_nodes
    exact_x = [fa + (j + 1) * (fb - fa) / (n + 1) for j in range(n)]
    tol_x = 0.0 if _exact_coords(grid.x, exact_x) else 1e-12 * (grid.b - grid.a)
    # explicit time lists are exact by definition: the stored floats are the grid
    tol_t = 0.0
    return tol_x, tol_t


def control_index_sets(grid: SpaceTimeGrid, region: ControlRegion) -> IndexSets:
    """Index sets of nodes, space-time points and intervals inside the region.

    Raises GridError when no node or no space-time point is captured, since the
    solvers need nonempty constraint sets.
    """
    region.validate(grid)
    tol_x, tol_t = membership_tol(grid)

    in_x = (grid.x >= region.x_lo - tol_x) & (grid.x <= region.x_hi + tol_x)
    space = np.nonzero(in_x)[0]

    # time points t_k, k = 0..N_tau; only k <= N_tau - 1 can qualify (t_hi < T)
    in_t = (grid.t >= region.t_lo - tol_t) & (grid.t <= region.t_hi + tol_t)
    t_hits = np.nonzero(in_t)[0]
    spacetime = [(int(j), int(k)) for j in space for k in t_hits]
    spacetime.sort()

    # intervals I_k = (t_{k-1}, t_k] contained in the closed window
    lo_ok = grid.t[:-1] >= region.t_lo - tol_t
    hi_ok = grid.t[1:] <= region.t_hi + tol_t
    intervals = np.nonzero(lo_ok & hi_ok)[0]

    if space.size == 0 or len(spacetime) == 0:
        raise GridError(
            "grid too coarse for control region: no node/time point falls in "
            f"[{region.x_lo}, {region.x_hi}] x [{region.t_lo}, {region.t_hi}]"
        )
    return IndexSets(space=space, spacetime=spacetime, intervals=intervals)
