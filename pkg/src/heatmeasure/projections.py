"""Nodal hat functions and the induced projections of measures.

An atomic measure is mapped onto the discrete control space by integrating
the space(-time) hat functions against it: the projected coefficient at a
node (pair) is the sum of atom weights times the hat values there.  These
projections preserve pairings with discrete test functions exactly and never
increase the total variation, which is what makes the implicit control
discretization well posed.
"""

from __future__ import annotations

import numpy as np

from .grid import IndexSets, SpaceTimeGrid

__all__ = [
    "space_hat",
    "time_hat",
    "project_measure_space",
    "project_measure_spacetime",
    "interpolate_space",
    "interpolate_spacetime",
    "evaluate_space",
    "evaluate_spacetime",
]


def space_hat(grid: SpaceTimeGrid, j: int, x) -> np.ndarray:
    """Value of the interior nodal basis function e_{x_j} at x (j is 0-based)."""
    nodes = np.concatenate(([grid.a], grid.x, [grid.b]))
    xj = nodes[j + 1]
    left, right = nodes[j], nodes[j + 2]
    x = np.asarray(x, dtype=float)
    up = (x - left) / (xj - left)
    down = (right - x) / (right - xj)
    return np.clip(np.minimum(up, down), 0.0, 1.0)


def time_hat(grid: SpaceTimeGrid, k: int, t) -> np.ndarray:
    """Value of the time nodal basis e_{t_k}, k = 0..N_tau-1 (w(T) = 0 holds)."""
    t = np.asarray(t, dtype=float)
    tk = grid.t[k]
    left = grid.t[k - 1] if k > 0 else grid.t[0]
    right = grid.t[k + 1]
    if k > 0:
        up = (t - left) / (tk - left)
    else:
        up = np.where(t >= tk, 1.0, 0.0)
    down = (right - t) / (right - tk)
    return np.clip(np.minimum(up, down), 0.0, 1.0)


def project_measure_space(grid: SpaceTimeGrid, idx: IndexSets, atoms):
    """Coefficients of the projected spatial measure sum_a w_a delta_{x_a}.

    atoms is a sequence of (x, weight); the result maps each retained node j
    to sum_a w_a e_{x_j}(x_a).
    """
    coeffs = np.zeros(idx.space.size)
    for x_a, w_a in atoms:
        for i, j in enumerate(idx.space):
            coeffs[i] += w_a * space_hat(grid, int(j), x_a)
    return coeffs


def project_measure_spacetime(grid: SpaceTimeGrid, idx: IndexSets, atoms):
    """Coefficients of the projected space-time measure over the (j, k) pairs.

    atoms is a sequence of (x, t, weight); entry i belongs to idx.spacetime[i]
    and holds sum_a w_a e_{x_j}(x_a) e_{t_k}(t_a).
    """
    coeffs = np.zeros(len(idx.spacetime))
    for x_a, t_a, w_a in atoms:
        for i, (j, k) in enumerate(idx.spacetime):
            coeffs[i] += w_a * space_hat(grid, j, x_a) * time_hat(grid, k, t_a)
    return coeffs


def interpolate_space(grid: SpaceTimeGrid, idx: IndexSets, f):
    """Nodal interpolant coefficients of f over the retained nodes."""
    return np.array([f(grid.x[j]) for j in idx.space], dtype=float)


def interpolate_spacetime(grid: SpaceTimeGrid, idx: IndexSets, f):
    """Nodal interpolant coefficients of f(x, t) over the retained pairs."""
    return np.array([f(grid.x[j], grid.t[k]) for j, k in idx.spacetime], dtype=float)


def evaluate_spacetime(grid: SpaceTimeGrid, idx: IndexSets, coeffs, x, t) -> float:
    """Evaluate sum over pairs of coeff * e_{x_j}(x) e_{t_k}(t)."""
    total = 0.0
    for c, (j, k) in zip(coeffs, idx.spacetime):
        total += c * space_hat(grid, j, x) * time_hat(grid, k, t)
    return float(total)


def evaluate_space(grid: SpaceTimeGrid, idx: IndexSets, coeffs, x) -> float:
    """Evaluate sum over nodes of coeff * e_{x_j}(x)."""
    total = 0.0
    for c, j in zip(coeffs, idx.space):
        total += c * space_hat(grid, int(j), x)
    return float(total)
