"""Cross-checks against a generic convex solver on the primal problem.

The semismooth Newton method works entirely on the predual side; these tests
re-solve the primal (state equation as an equality constraint, lumped L^q
tracking, weighted l1 penalties) with an interior-point solver and compare
controls and norms.  Skipped when cvxpy is unavailable.
"""

import numpy as np
import pytest

import heatmeasure as hm
from heatmeasure.newton import SolverConfig, alpha_max
from heatmeasure.recovery import measure_norm, recover_control

cp = pytest.importorskip("cvxpy")

Q = 4.0 / 3.0


def _primal_solve(system, yd_flat, alpha, beta=None):
    n = system.n_dofs
    m = system.alpha_rows.size
    u = cp.Variable(m)
    Y = cp.Variable(n)
    RT = np.zeros((n, m))
    for i, r in enumerate(system.alpha_rows):
        RT[r, i] = system.alpha_tau[i]
    rhs = RT @ u
    terms = [alpha * cp.norm1(cp.multiply(system.alpha_tau, u))]
    u0 = None
    if beta is not None:
        # both schemes scatter the initial measure into the leading block of
        # the reduced system: directly for the variational scheme, and for DG
        # through M M^{-1} = identity (project the measure, then step once)
        mb = system.beta_rows.size
        u0 = cp.Variable(mb)
        RB = np.zeros((n, mb))
        for i, r in enumerate(system.beta_rows):
            RB[r, i] = 1.0
        rhs = rhs + RB @ u0
        terms.append(beta * cp.norm1(u0))
    track = (1.0 / Q) * cp.sum(cp.multiply(system.weights, cp.abs(Y - yd_flat) ** Q))
    prob = cp.Problem(
        cp.Minimize(track + sum(terms)), [system.L_T_pre.toarray() @ Y == rhs]
    )
    prob.solve(solver=cp.CLARABEL)
    assert prob.status in ("optimal", "optimal_inaccurate")
    return u.value, None if u0 is None else u0.value


def _newton_coefficients(system, y_d, alpha, beta=None):
    it, _ = hm.newton_solve(system, y_d, alpha, beta, SolverConfig(newton_tol=1e-13))
    control = recover_control(system, y_d, it.w, with_initial=beta is not None)
    coeffs = np.zeros(system.alpha_rows.size)
    for j, k, c in zip(control.atom_j, control.atom_k, control.atom_coeff):
        coeffs[system.alpha_pairs.index((j, k))] = c
    u0 = np.zeros(system.beta_rows.size)
    for i, j in enumerate(system.beta_nodes):
        hits = np.nonzero(control.initial_j == j)[0]
        if hits.size:
            u0[i] = control.initial_coeff[hits[0]]
    return coeffs, u0, control


@pytest.mark.parametrize("assemble", [hm.assemble_vd_system, hm.assemble_dg_system])
def test_primal_agreement(coarse_grid, region, coarse_yd, assemble):
    system = assemble(coarse_grid, region)
    alpha = 0.05
    u_ref, _ = _primal_solve(system, coarse_yd.flat(), alpha)
    mine, _, control = _newton_coefficients(system, coarse_yd, alpha)
    assert np.max(np.abs(mine - u_ref)) < 1e-5
    ref_norm = float(np.sum(system.alpha_tau * np.abs(u_ref)))
    assert measure_norm(control) == pytest.approx(ref_norm, abs=1e-6)


@pytest.mark.parametrize("assemble", [hm.assemble_vd_system, hm.assemble_dg_system])
def test_primal_agreement_with_initial_measure(assemble):
    grid = hm.build_grid(0.0, 1.0, 1.0, 3, hm.equidistant_time_points(1.0, 8))
    region = hm.ControlRegion(0.25, 0.75, 0.25, 0.75)
    y_d = hm.sample_desired_state(
        grid,
        lambda x, t: np.exp(-20 * (np.asarray(x) - 0.5) ** 2) * np.exp(-2.0 * np.asarray(t)),
    )
    system = assemble(grid, region)
    a_bar, b_bar, _ = alpha_max(system, y_d)
    alpha, beta = 0.5 * a_bar, 0.4 * b_bar
    u_ref, u0_ref = _primal_solve(system, y_d.flat(), alpha, beta)
    mine, mine0, _ = _newton_coefficients(system, y_d, alpha, beta)
    assert np.max(np.abs(mine - u_ref)) < 1e-5
    assert np.max(np.abs(mine0 - u0_ref)) < 1e-5
