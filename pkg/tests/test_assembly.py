import numpy as np
import pytest

import heatmeasure as hm
from oracles import (
    dense_dg_matrix,
    dense_vd_matrix,
    quadrature_lumped,
    quadrature_mass,
    quadrature_stiffness,
)


def test_mass_equidistant_entries(coarse_grid):
    M = hm.assemble_mass(coarse_grid).toarray()
    h = 0.25
    assert np.allclose(np.diag(M), 2 * h / 3, atol=1e-15)
    assert np.allclose(np.diag(M, 1), h / 6, atol=1e-15)


def test_mass_matches_quadrature(coarse_grid):
    M = hm.assemble_mass(coarse_grid).toarray()
    assert np.max(np.abs(M - quadrature_mass(coarse_grid))) < 1e-14


def test_mass_single_node():
    grid = hm.build_grid(0.0, 1.0, 1.0, 1, [0.0, 1.0])
    M = hm.assemble_mass(grid).toarray()
    assert M[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_mass_spd():
    grid = hm.build_grid(0.0, 1.0, 1.0, 5, [0.0, 1.0])
    M = hm.assemble_mass(grid).toarray()
    assert np.allclose(M, M.T)
    assert np.min(np.linalg.eigvalsh(M)) > 0


def test_stiffness_entries_and_quadrature(coarse_grid):
    A = hm.assemble_stiffness(coarse_grid).toarray()
    assert np.allclose(np.diag(A), 8.0, atol=1e-14)
    assert np.allclose(np.diag(A, 1), -4.0, atol=1e-14)
    assert np.max(np.abs(A - quadrature_stiffness(coarse_grid))) < 1e-14


def test_stiffness_single_node():
    grid = hm.build_grid(0.0, 1.0, 1.0, 1, [0.0, 1.0])
    assert hm.assemble_stiffness(grid).toarray()[0, 0] == pytest.approx(4.0, abs=1e-14)


def test_stiffness_interior_row_sums():
    # away from the boundary the hats form a partition of unity
    grid = hm.build_grid(0.0, 1.0, 1.0, 9, [0.0, 1.0])
    A = hm.assemble_stiffness(grid).toarray()
    sums = A.sum(axis=1)
    assert np.allclose(sums[1:-1], 0.0, atol=1e-12)


def test_lumped_weights(coarse_grid):
    w = hm.lumped_weights(coarse_grid)
    assert np.allclose(w, 0.25, atol=1e-15)
    assert np.max(np.abs(w - quadrature_lumped(coarse_grid))) < 1e-14
    # sum is (b - a) - h: two boundary half-hats missing
    assert np.sum(w) == pytest.approx(1.0 - 0.25, abs=1e-15)


def test_lumped_single_node():
    grid = hm.build_grid(0.0, 1.0, 1.0, 1, [0.0, 1.0])
    assert hm.lumped_weights(grid)[0] == pytest.approx(0.5, abs=1e-15)


def test_vd_block_structure_tiny():
    # N_h = 1, N_tau = 2, h = tau = 1/2: scalar blocks M = 1/3, A = 4
    grid = hm.build_grid(0.0, 1.0, 1.0, 1, [0.0, 0.5, 1.0])
    region = hm.ControlRegion(0.25, 0.75, 0.25, 0.75)
    system = hm.assemble_vd_system(grid, region)
    expected = np.array([[1 / 3 + 1.0, 0.0], [-1 / 3 + 1.0, 1 / 3 + 1.0]])
    assert np.allclose(system.L_T.toarray(), expected, atol=1e-15)


def test_vd_matches_dense_block_formula(coarse_grid, region, vd_system):
    M = hm.assemble_mass(coarse_grid).toarray()
    A = hm.assemble_stiffness(coarse_grid).toarray()
    dense = dense_vd_matrix(M, A, coarse_grid.tau)
    assert np.max(np.abs(vd_system.L_T.toarray() - dense)) < 1e-14


def test_vd_lower_block_bidiagonal(vd_system):
    n = vd_system.n_space
    L = vd_system.L_T.toarray()
    nt = vd_system.n_steps
    for kr in range(nt):
        for kc in range(nt):
            blk = L[kr * n : (kr + 1) * n, kc * n : (kc + 1) * n]
            if kc not in (kr, kr - 1):
                assert np.all(blk == 0.0)


def test_vd_constant_in_time_action(coarse_grid, vd_system):
    # constant-in-time state: mass contributions cancel in interior rows
    n, nt = vd_system.n_space, vd_system.n_steps
    rng = np.random.default_rng(7)
    yk = rng.normal(size=n)
    y = np.tile(yk, nt)
    out = (vd_system.L_T @ y).reshape(nt, n)
    A = hm.assemble_stiffness(coarse_grid).toarray()
    tau = coarse_grid.tau
    for k in range(1, nt):
        expected = 0.5 * (tau[k - 1] + tau[k]) * (A @ yk)
        assert np.allclose(out[k], expected, atol=1e-13)


def test_dg_tiny_block():
    # single node, single step: blocks are the scalars M = 1/3, M + tau A = 1/3 + 4
    M = np.array([[1.0 / 3.0]])
    A = np.array([[4.0]])
    from oracles import dense_dg_matrix

    expected = np.array([[1 / 3, 0.0], [-1 / 3, 1 / 3 + 4.0]])
    assert np.allclose(dense_dg_matrix(M, A, [1.0]), expected, atol=1e-15)
    # assembled variant on two steps so the control region captures t = 1/2
    grid = hm.build_grid(0.0, 1.0, 1.0, 1, [0.0, 0.5, 1.0])
    region = hm.ControlRegion(0.25, 0.75, 0.25, 0.75)
    system = hm.assemble_dg_system(grid, region)
    expected2 = np.array(
        [[1 / 3, 0, 0], [-1 / 3, 1 / 3 + 2.0, 0], [0, -1 / 3, 1 / 3 + 2.0]]
    )
    assert np.allclose(system.L_T.toarray(), expected2, atol=1e-15)


def test_dg_matches_dense_block_formula(coarse_grid, dg_system):
    M = hm.assemble_mass(coarse_grid).toarray()
    A = hm.assemble_stiffness(coarse_grid).toarray()
    dense = dense_dg_matrix(M, A, coarse_grid.tau)
    assert np.max(np.abs(dg_system.L_T.toarray() - dense)) < 1e-14
    # reduced predual matrix is the trailing block
    n = coarse_grid.n_nodes
    assert np.max(np.abs(dg_system.L_T_pre.toarray() - dense[n:, n:])) < 1e-14


def test_adjointness_random_vectors(vd_system, dg_system):
    rng = np.random.default_rng(3)
    for system in (vd_system, dg_system):
        for _ in range(10):
            y = rng.normal(size=system.n_dofs)
            w = rng.normal(size=system.n_dofs)
            lhs = np.dot(system.apply_LT(y), w)
            rhs = np.dot(y, system.apply_L(w))
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1.0)


def test_forward_backward_solves(vd_system, dg_system):
    rng = np.random.default_rng(11)
    for system in (vd_system, dg_system):
        rhs = rng.normal(size=system.n_dofs)
        y = system.solve_LT(rhs)
        assert np.max(np.abs(system.apply_LT(y) - rhs)) < 1e-11
        w = system.solve_L(rhs)
        assert np.max(np.abs(system.apply_L(w) - rhs)) < 1e-11


def test_vd_weak_form_residual(coarse_grid, region, vd_system):
    """State solve satisfies the weak form for every basis test function.

    The weak form is assembled independently from exact piecewise integrals of
    the basis products, then evaluated at the solved state.
    """
    rng = np.random.default_rng(5)
    n, nt = vd_system.n_space, vd_system.n_steps
    u = np.zeros(vd_system.n_dofs)
    u[vd_system.alpha_rows] = rng.normal(size=vd_system.alpha_rows.size)
    y = vd_system.solve_LT(u).reshape(nt, n)

    M = hm.assemble_mass(coarse_grid).toarray()
    A = hm.assemble_stiffness(coarse_grid).toarray()
    tau = coarse_grid.tau
    scale = float(np.max(np.abs(u)))
    for m in range(nt):  # test function e_{x_l} x e_{t_m}
        if m == 0:
            lhs = M @ y[0] + 0.5 * tau[0] * (A @ y[0])
        else:
            lhs = M @ (y[m] - y[m - 1]) + 0.5 * tau[m - 1] * (A @ y[m - 1]) + 0.5 * tau[
                m
            ] * (A @ y[m])
        rhs = u[m * n : (m + 1) * n]
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_dg_state_stepping(coarse_grid, dg_system):
    """DG solve reproduces the implicit Euler recursion step by step."""
    rng = np.random.default_rng(13)
    n, nt = dg_system.n_space, dg_system.n_steps
    rhs = rng.normal(size=dg_system.n_dofs)
    y = dg_system.solve_LT(rhs).reshape(nt, n)
    M = hm.assemble_mass(coarse_grid).toarray()
    A = hm.assemble_stiffness(coarse_grid).toarray()
    tau = coarse_grid.tau
    prev = np.zeros(n)
    for k in range(nt):
        lhs = M @ (y[k] - prev) + tau[k] * (A @ y[k])
        assert np.max(np.abs(lhs - rhs[k * n : (k + 1) * n])) < 1e-11
        prev = y[k]


def test_dg_interval_alpha_rows(dg_system):
    # alpha rows pair nodes inside the spatial box with intervals I_3..I_10
    ks = sorted({k for (_, k) in dg_system.alpha_pairs})
    assert ks == list(range(3, 11))
    assert all(j in (0, 1, 2) for (j, _) in dg_system.alpha_pairs)


def test_exponent_validation(coarse_grid, region):
    with pytest.raises(ValueError):
        hm.assemble_vd_system(coarse_grid, region, q=2.5)
    with pytest.raises(ValueError):
        hm.assemble_vd_system(coarse_grid, region, q=1.0)
    system = hm.assemble_vd_system(coarse_grid, region, q=2.0)
    assert system.p == pytest.approx(2.0)


def test_matrix_dump(tmp_path, vd_system):
    hm.assembly.dump_matrices(vd_system, tmp_path)
    assert (tmp_path / "system_vd.mtx").exists()
    assert (tmp_path / "mass.mtx").exists()
    assert (tmp_path / "stiffness.mtx").exists()


def test_matrix_dump_roundtrip(tmp_path, vd_system):
    import scipy.io

    hm.assembly.dump_matrices(vd_system, tmp_path)
    loaded = scipy.io.mmread(tmp_path / "system_vd.mtx").tocsr()
    assert (loaded - vd_system.L_T).nnz == 0
    mass = scipy.io.mmread(tmp_path / "mass.mtx").toarray()
    assert np.allclose(mass, vd_system.mass.toarray(), atol=0)
