"""Recovery of the measure control from the converged adjoint, plus diagnostics.

At the predual solution the product L^T (|z|^{p-2} z + y_d) is supported on
the constraint rows; its entries there are the control coefficients, read off
directly.  For the variational scheme an atom is a space-time Dirac with the
stored coefficient; for DG the row value divided by the interval length is a
density over that interval.  Everything downstream (measure norms, state
solves, tracking errors, support prediction, duality gap) is assembled here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import DiscreteSystem, lumped_weights
from .grid import SpaceTimeGrid
from .newton import _power, _yd_flat, objective

__all__ = [
    "MeasureControl",
    "SupportSets",
    "RunReport",
    "RecoveryError",
    "recover_control",
    "recover_alpha_zero",
    "measure_norm",
    "solve_state",
    "tracking_error",
    "tracking_error_quadrature",
    "support_from_adjoint",
    "build_report",
]


class RecoveryError(RuntimeError):
    """Recovered coefficients leak outside the admissible index rows."""


@dataclass
class MeasureControl:
    """Finite atomic control.

    atom_k is the time-point index for the variational scheme (the atom sits at
    (x_j, t_k)) and the 1-based interval number for DG (the coefficient is a
    density over I_k).  Initial atoms carry the measure at t = 0 when the
    beta-constraints were active.
    """

    scheme: str
    grid: SpaceTimeGrid
    atom_j: np.ndarray
    atom_k: np.ndarray
    atom_coeff: np.ndarray
    initial_j: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    initial_coeff: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def positions(self):
        """(x, t) coordinates; DG atoms are placed at interval right endpoints.

        Both schemes land on t[k]: the atom time point for the variational
        scheme, the right endpoint of I_k for DG.
        """
        return self.grid.x[self.atom_j], self.grid.t[self.atom_k]

    def dg_intervals(self):
        """(t_{k-1}, t_k) extents of the DG interval atoms."""
        if self.scheme != "dg":
            raise ValueError("interval extents only exist for the DG scheme")
        return self.grid.t[self.atom_k - 1], self.grid.t[self.atom_k]

    def dirac_atoms(self):
        """Equivalent Dirac weights; DG densities turn into tau_k * density at t_k."""
        if self.scheme == "vd":
            return self.atom_coeff.copy()
        tau = self.grid.tau[self.atom_k - 1]
        return tau * self.atom_coeff


@dataclass(frozen=True)
class SupportSets:
    """Support predicted from where the adjoint touches its bounds."""

    positive: list  # (j, k) with w = -alpha (positive part of the control)
    negative: list  # (j, k) with w = +alpha
    initial_positive: list
    initial_negative: list

    def all_pairs(self):
        return sorted(set(self.positive) | set(self.negative))


def _control_values(system: DiscreteSystem, r: np.ndarray):
    coeff = r[system.alpha_rows] / system.alpha_tau
    return coeff


def _offindex_check(system, r, with_initial, residual_tol):
    mask = np.ones(system.n_dofs, dtype=bool)
    mask[system.alpha_rows] = False
    if with_initial:
        mask[system.beta_rows] = False
    off = np.abs(r[mask])
    if off.size == 0:
        return
    tol = residual_tol
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.max(np.abs(r))))
    worst = float(np.max(off))
    if worst > tol:
        idx = np.nonzero(mask)[0][np.argsort(off)[::-1][:5]]
        nh = system.n_space
        offenders = ", ".join(
            f"(j={i % nh}, block={i // nh}): {r[i]:.3e}" for i in idx
        )
        raise RecoveryError(
            f"recovered coefficients leak outside the control index rows "
            f"(max {worst:.3e} > tol {tol:.3e}); worst entries: {offenders}"
        )


def recover_control(
    system: DiscreteSystem,
    y_d,
    w_bar: np.ndarray,
    with_initial: bool = False,
    residual_tol: Optional[float] = None,
    drop_tol: Optional[float] = None,
) -> MeasureControl:
    """Read the control off r = L^T(|z|^{p-2} z + y_d) at the constraint rows.

    Entries outside the rows must vanish to the stationarity tolerance; a
    violation raises RecoveryError naming the worst offenders.  Atoms with
    coefficients below drop_tol (default 1e-10 relative) are discarded, which
    removes roundoff-level debris from inactive constraints.
    """
    yd = _yd_flat(system, y_d)
    z = system.lp_representative(np.asarray(w_bar, dtype=float))
    r = system.apply_LT(_power(z, system.p - 1.0) + yd)
    _offindex_check(system, r, with_initial, residual_tol)

    coeff = _control_values(system, r)
    weights_abs = np.abs(coeff) * system.alpha_tau
    if drop_tol is None:
        drop_tol = 1e-10 * (1.0 + float(np.max(weights_abs, initial=0.0)))
    keep = weights_abs > drop_tol
    pairs = [system.alpha_pairs[i] for i in np.nonzero(keep)[0]]
    atom_j = np.array([j for j, _ in pairs], dtype=int)
    atom_k = np.array([k for _, k in pairs], dtype=int)

    initial_j = np.zeros(0, dtype=int)
    initial_coeff = np.zeros(0)
    if with_initial:
        u0 = r[system.beta_rows]
        keep0 = np.abs(u0) > drop_tol
        initial_j = system.beta_nodes[keep0]
        initial_coeff = u0[keep0]

    return MeasureControl(
        scheme=system.scheme,
        grid=system.grid,
        atom_j=atom_j,
        atom_k=atom_k,
        atom_coeff=coeff[keep],
        initial_j=initial_j,
        initial_coeff=initial_coeff,
    )


def recover_alpha_zero(system: DiscreteSystem, y_d) -> MeasureControl:
    """Closed-form control for alpha = 0: apply the heat operator to y_d.

    The only admissible adjoint is w = 0, so the coefficients are the
    constraint-row entries of L^T y_d.  No off-row check applies here and no
    coefficients are dropped.
    """
    yd = _yd_flat(system, y_d)
    r = system.apply_LT(yd)
    coeff = _control_values(system, r)
    atom_j = np.array([j for j, _ in system.alpha_pairs], dtype=int)
    atom_k = np.array([k for _, k in system.alpha_pairs], dtype=int)
    return MeasureControl(
        scheme=system.scheme,
        grid=system.grid,
        atom_j=atom_j,
        atom_k=atom_k,
        atom_coeff=coeff,
    )


def measure_norm(control: MeasureControl) -> float:
    """Total variation: sum of |weights|, DG densities weighted by tau_k."""
    if control.scheme == "vd":
        total = float(np.sum(np.abs(control.atom_coeff)))
    else:
        tau = control.grid.tau[control.atom_k - 1]
        total = float(np.sum(tau * np.abs(control.atom_coeff)))
    total += float(np.sum(np.abs(control.initial_coeff)))
    return total


def solve_state(system: DiscreteSystem, control: MeasureControl) -> np.ndarray:
    """State coefficients driven by the control (time-major, N_sigma entries)."""
    nh = system.n_space
    rhs = np.zeros(system.n_dofs)
    if control.scheme == "vd":
        if control.atom_j.size:
            np.add.at(rhs, control.atom_k * nh + control.atom_j, control.atom_coeff)
        if control.initial_j.size:
            np.add.at(rhs, control.initial_j, control.initial_coeff)
    else:
        if control.atom_j.size:
            tau = control.grid.tau[control.atom_k - 1]
            np.add.at(
                rhs, (control.atom_k - 1) * nh + control.atom_j, tau * control.atom_coeff
            )
        if control.initial_j.size:
            scatter = np.zeros(nh)
            np.add.at(scatter, control.initial_j, control.initial_coeff)
            y0 = system.solve_mass(scatter)
            rhs[:nh] += system.mass @ y0
    return system.solve_LT(rhs)


def tracking_error(grid: SpaceTimeGrid, y: np.ndarray, y_d, q: float) -> float:
    """Lumped L^q distance (sum |y - y_d|^q omega_j tau_k)^(1/q)."""
    yd = y_d.flat() if hasattr(y_d, "flat") and callable(y_d.flat) else np.asarray(y_d).ravel()
    weights = np.outer(grid.tau, lumped_weights(grid)).ravel()
    diff = np.abs(np.asarray(y).ravel() - yd)
    return float(np.sum(diff**q * weights) ** (1.0 / q))


def tracking_error_quadrature(
    grid: SpaceTimeGrid, y: np.ndarray, field, q: float, n_gauss: int = 3
) -> float:
    """L^q distance between the discrete state and an analytic field.

    The discrete state is piecewise linear in space (zero at the boundary) and
    constant on each time interval; the field is integrated with Gauss rules
    per space-time cell.  Meant for convergence studies where the lumped
    quadrature would be too coarse a comparison.
    """
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    nodes = np.concatenate(([grid.a], grid.x, [grid.b]))
    vals = np.zeros((grid.n_steps, grid.n_nodes + 2))
    vals[:, 1:-1] = np.asarray(y).reshape(grid.n_steps, grid.n_nodes)

    total = 0.0
    lo, hi = nodes[:-1], nodes[1:]
    mid_x = 0.5 * (lo + hi)
    half_x = 0.5 * (hi - lo)
    for k in range(grid.n_steps):
        t0, t1 = grid.t[k], grid.t[k + 1]
        tq = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gx
        tw = 0.5 * (t1 - t0) * gw
        left, right = vals[k, :-1], vals[k, 1:]
        for gi in range(n_gauss):
            xq = mid_x + half_x * gx[gi]
            frac = (xq - lo) / (hi - lo)
            yh = left + frac * (right - left)
            for ti in range(n_gauss):
                diff = np.abs(yh - field(xq, np.full_like(xq, tq[ti])))
                total += tw[ti] * np.sum(diff**q * (half_x * gw[gi]))
    return float(total ** (1.0 / q))


def support_from_adjoint(
    system: DiscreteSystem,
    w: np.ndarray,
    alpha: float,
    beta: Optional[float] = None,
    tol: Optional[float] = None,
) -> SupportSets:
    """Index pairs where the adjoint touches a bound (default tol 1e-6 alpha)."""
    if tol is None:
        tol = 1e-6 * alpha
    wa = np.asarray(w)[system.alpha_rows]
    pos = [system.alpha_pairs[i] for i in np.nonzero(wa <= -alpha + tol)[0]]
    neg = [system.alpha_pairs[i] for i in np.nonzero(wa >= alpha - tol)[0]]
    ipos, ineg = [], []
    if beta is not None:
        tol_b = 1e-6 * beta
        wb = np.asarray(w)[system.beta_rows]
        ipos = [int(j) for j in system.beta_nodes[wb <= -beta + tol_b]]
        ineg = [int(j) for j in system.beta_nodes[wb >= beta - tol_b]]
    return SupportSets(positive=pos, negative=neg, initial_positive=ipos, initial_negative=ineg)


@dataclass
class RunReport:
    """Scalar summary of one solve, serializable to JSON."""

    scheme: str
    alpha: float
    beta: Optional[float]
    measure_norm: float
    initial_measure_norm: float
    tracking_error: float
    objective_primal: float
    objective_predual: float
    duality_gap: float
    iterations: int
    support: list
    dg_dirac_convention: Optional[str] = None

    def to_json(self) -> str:
        payload = {
            "scheme": self.scheme,
            "alpha": self.alpha,
            "beta": self.beta,
            "measure_norm": self.measure_norm,
            "initial_measure_norm": self.initial_measure_norm,
            "tracking_error": self.tracking_error,
            "objective_primal": self.objective_primal,
            "objective_predual": self.objective_predual,
            "duality_gap": self.duality_gap,
            "iterations": self.iterations,
            "support": self.support,
        }
        if self.dg_dirac_convention is not None:
            payload["dg_dirac_convention"] = self.dg_dirac_convention
        return json.dumps(payload, indent=2, sort_keys=True)


def build_report(
    system: DiscreteSystem,
    y_d,
    alpha: float,
    beta: Optional[float],
    control: MeasureControl,
    w_bar: np.ndarray,
    iterations: int,
) -> RunReport:
    """Assemble the scalar diagnostics for one converged run."""
    y = solve_state(system, control)
    err = tracking_error(system.grid, y, y_d, system.q)
    norm_u = float(np.sum(np.abs(control.dirac_atoms()))) if control.atom_j.size else 0.0
    norm_u0 = float(np.sum(np.abs(control.initial_coeff)))
    j_primal = err**system.q / system.q + alpha * norm_u + (beta or 0.0) * norm_u0
    k_predual = objective(system, y_d, w_bar)
    x_pos, t_pos = control.positions() if control.atom_j.size else (np.zeros(0), np.zeros(0))
    support = [
        {"x": float(xi), "t": float(ti), "coefficient": float(ci)}
        for xi, ti, ci in zip(x_pos, t_pos, control.atom_coeff)
    ]
    support += [
        {"x": float(system.grid.x[j]), "t": 0.0, "coefficient": float(c), "initial": True}
        for j, c in zip(control.initial_j, control.initial_coeff)
    ]
    return RunReport(
        scheme=system.scheme,
        alpha=alpha,
        beta=beta,
        measure_norm=norm_u + norm_u0,
        initial_measure_norm=norm_u0,
        tracking_error=err,
        objective_primal=j_primal,
        objective_predual=k_predual,
        duality_gap=j_primal + k_predual,
        iterations=iterations,
        support=support,
        dg_dirac_convention="interval right endpoint" if system.scheme == "dg" else None,
    )
