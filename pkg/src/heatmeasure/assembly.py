"""P1 finite element assembly and the space-time systems of both schemes.

Spatial matrices are the standard 1D mass and stiffness tridiagonals on the
interior nodes.  Two space-time operators are assembled as sparse block lower
bidiagonal matrices acting on time-major coefficient vectors:

* variational scheme: diagonal blocks M + (tau_k/2) A and subdiagonal blocks
  -M + (tau_k/2) A, a Crank-Nicolson-like pairing of piecewise constant states
  with piecewise linear test functions in time;
* DG scheme: first block row [M, 0, ...], then rows [-M, M + tau_k A], the
  implicit Euler stepping.

The transposed matrix maps state coefficients to the duals of the adjoint
space; applying the plain matrix and dividing by the lumped space-time weights
omega_j * tau_k gives the L^p representative used by the predual objective.
All solves with these matrices are block forward/backward substitutions with
a banded Cholesky factorization per diagonal block.
"""

from __future__ import annotations

import pathlib
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

from .grid import ControlRegion, IndexSets, SpaceTimeGrid, control_index_sets

__all__ = [
    "assemble_mass",
    "assemble_stiffness",
    "lumped_weights",
    "DiscreteSystem",
    "assemble_vd_system",
    "assemble_dg_system",
    "dump_matrices",
]

DEFAULT_Q = 4.0 / 3.0


def assemble_mass(grid: SpaceTimeGrid) -> sp.csr_matrix:
    """Tridiagonal mass matrix (<e_i, e_j>) on the interior nodes."""
    lens = grid.element_lengths()
    n = grid.n_nodes
    diag = (lens[:-1] + lens[1:]) / 3.0
    off = lens[1:-1] / 6.0
    return sp.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format="csr")


def assemble_stiffness(grid: SpaceTimeGrid) -> sp.csr_matrix:
    """Tridiagonal stiffness matrix (int grad e_i grad e_j) on the interior nodes."""
    lens = grid.element_lengths()
    n = grid.n_nodes
    diag = 1.0 / lens[:-1] + 1.0 / lens[1:]
    off = -1.0 / lens[1:-1]
    return sp.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format="csr")


def lumped_weights(grid: SpaceTimeGrid) -> np.ndarray:
    """Hat function integrals omega_j = int e_j dx (the lumped spatial mass)."""
    lens = grid.element_lengths()
    return (lens[:-1] + lens[1:]) / 2.0


def _banded_upper(mat: sp.spmatrix) -> np.ndarray:
    """Upper banded storage of a symmetric tridiagonal sparse matrix."""
    m = mat.tocsr()
    n = m.shape[0]
    ab = np.zeros((2, n))
    ab[1] = m.diagonal()
    if n > 1:
        ab[0, 1:] = m.diagonal(1)
    return ab


class _BlockSolver:
    """Forward/backward substitution for a block lower bidiagonal matrix.

    The matrix has diagonal blocks D_k = M + c_diag[k] * A and subdiagonal
    blocks C_k = sub_m * M + c_sub[k] * A (C_k sits in block row k, column
    k - 1).  Diagonal blocks are SPD tridiagonal; one banded Cholesky factor
    is kept per distinct coefficient.
    """

    def __init__(self, mass, stiffness, c_diag, c_sub, sub_m):
        self.mass = mass
        self.stiffness = stiffness
        self.c_diag = np.asarray(c_diag, dtype=float)
        self.c_sub = np.asarray(c_sub, dtype=float)
        self.sub_m = float(sub_m)
        self.n_space = mass.shape[0]
        self.n_blocks = self.c_diag.size
        factors = {}
        for c in self.c_diag:
            key = float(c)
            if key not in factors:
                ab = _banded_upper(mass + c * stiffness)
                factors[key] = scipy.linalg.cholesky_banded(ab, lower=False)
        self._factors = [factors[float(c)] for c in self.c_diag]

    def _apply_sub(self, k, v):
        out = self.c_sub[k] * (self.stiffness @ v)
        if self.sub_m != 0.0:
            out += self.sub_m * (self.mass @ v)
        return out

    def solve_lower(self, rhs: np.ndarray) -> np.ndarray:
        """Solve L^T y = rhs by forward block substitution."""
        nh, nb = self.n_space, self.n_blocks
        r = rhs.reshape(nb, nh)
        y = np.empty_like(r)
        y[0] = scipy.linalg.cho_solve_banded((self._factors[0], False), r[0])
        for k in range(1, nb):
            b = r[k] - self._apply_sub(k, y[k - 1])
            y[k] = scipy.linalg.cho_solve_banded((self._factors[k], False), b)
        return y.ravel()

    def solve_upper(self, rhs: np.ndarray) -> np.ndarray:
        """Solve L w = rhs (the transpose system) by backward block substitution."""
        nh, nb = self.n_space, self.n_blocks
        r = rhs.reshape(nb, nh)
        w = np.empty_like(r)
        w[nb - 1] = scipy.linalg.cho_solve_banded((self._factors[nb - 1], False), r[nb - 1])
        for k in range(nb - 2, -1, -1):
            b = r[k] - self._apply_sub(k + 1, w[k + 1])
            w[k] = scipy.linalg.cho_solve_banded((self._factors[k], False), b)
        return w.ravel()


@dataclass
class DiscreteSystem:
    """Assembled discretization of the predual problem on one grid.

    The system matrix ``L_T`` follows the scheme: size N_sigma x N_sigma for
    the variational scheme and (N_sigma + N_h) x (N_sigma + N_h) for DG, where
    the extra leading block carries the initial condition.  The predual solver
    works on ``L_T_pre``, which equals ``L_T`` for the variational scheme and
    the trailing N_sigma x N_sigma block for DG (the leading row and column
    drop after identifying the initial adjoint value with the first interval
    value).

    Constraint bookkeeping: ``alpha_rows`` are flat adjoint-coefficient indices
    carrying the |w| <= alpha bounds, with ``alpha_pairs[i] = (j, k)`` naming
    node j and time-point index k (variational) or interval number k (DG).
    ``beta_rows``/``beta_nodes`` are the initial-trace rows.  Instances are
    immutable after assembly and safe to share across threads.
    """

    scheme: str
    grid: SpaceTimeGrid
    region: ControlRegion
    index_sets: IndexSets
    p: float
    q: float
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    omega: np.ndarray
    weights: np.ndarray  # lumped space-time diagonal over y-dofs, time-major
    L_T: sp.csr_matrix
    L_T_pre: sp.csr_matrix
    alpha_rows: np.ndarray
    alpha_pairs: list
    beta_rows: np.ndarray
    beta_nodes: np.ndarray
    alpha_tau: np.ndarray  # interval lengths per alpha row (DG density scaling; ones for VD)
    _solver: _BlockSolver = field(repr=False, default=None)

    @property
    def n_dofs(self) -> int:
        """Dimension of the predual coefficient space."""
        return self.L_T_pre.shape[0]

    @property
    def n_space(self) -> int:
        return self.grid.n_nodes

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    def apply_LT(self, v: np.ndarray) -> np.ndarray:
        return self.L_T_pre @ v

    def apply_L(self, w: np.ndarray) -> np.ndarray:
        return self.L_T_pre.T @ w

    def solve_LT(self, rhs: np.ndarray) -> np.ndarray:
        """State-direction solve L^T y = rhs (forward substitution)."""
        return self._solver.solve_lower(rhs)

    def solve_L(self, rhs: np.ndarray) -> np.ndarray:
        """Adjoint-direction solve L w = rhs (backward substitution)."""
        return self._solver.solve_upper(rhs)

    def lp_representative(self, w: np.ndarray) -> np.ndarray:
        """z = M_sigma^{-1} L w, the L^p function paired with the states."""
        return self.apply_L(w) / self.weights

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        """Solve M v = rhs on a single spatial block (DG initial condition)."""
        factor = scipy.linalg.cholesky_banded(_banded_upper(self.mass), lower=False)
        return scipy.linalg.cho_solve_banded((factor, False), rhs)


def _space_time_weights(grid: SpaceTimeGrid, omega: np.ndarray) -> np.ndarray:
    return np.outer(grid.tau, omega).ravel()


def _vd_alpha_rows(grid, idx: IndexSets):
    nh = grid.n_nodes
    rows = np.array([k * nh + j for (j, k) in idx.spacetime], dtype=int)
    return rows, list(idx.spacetime)


def _dg_alpha_rows(grid, idx: IndexSets):
    nh = grid.n_nodes
    pairs = [(int(j), int(i) + 1) for i in idx.intervals for j in idx.space]
    pairs.sort(key=lambda jk: (jk[1], jk[0]))
    rows = np.array([(k - 1) * nh + j for (j, k) in pairs], dtype=int)
    return rows, pairs


def assemble_vd_system(
    grid: SpaceTimeGrid, region: ControlRegion, q: float = DEFAULT_Q
) -> DiscreteSystem:
    """Variational space-time system (Crank-Nicolson-like block bidiagonal)."""
    _check_q(q)
    idx = control_index_sets(grid, region)
    mass = assemble_mass(grid)
    stiff = assemble_stiffness(grid)
    omega = lumped_weights(grid)
    tau = grid.tau
    n_tau = grid.n_steps

    shape = (n_tau, n_tau)
    eye = sp.identity(n_tau, format="csr")
    sub_ones = sp.diags(np.ones(n_tau - 1), -1, shape=shape, format="csr")
    sub_tau = sp.diags(tau[:-1] / 2.0, -1, shape=shape, format="csr")
    L_T = (
        sp.kron(eye, mass)
        + sp.kron(sp.diags(tau / 2.0, shape=shape), stiff)
        - sp.kron(sub_ones, mass)
        + sp.kron(sub_tau, stiff)
    ).tocsr()

    rows, pairs = _vd_alpha_rows(grid, idx)
    solver = _BlockSolver(mass, stiff, tau / 2.0, np.concatenate(([0.0], tau[:-1] / 2.0)), -1.0)
    return DiscreteSystem(
        scheme="vd",
        grid=grid,
        region=region,
        index_sets=idx,
        p=_conjugate(q),
        q=q,
        mass=mass,
        stiffness=stiff,
        omega=omega,
        weights=_space_time_weights(grid, omega),
        L_T=L_T,
        L_T_pre=L_T,
        alpha_rows=rows,
        alpha_pairs=pairs,
        beta_rows=idx.space.copy(),
        beta_nodes=idx.space.copy(),
        alpha_tau=np.ones(rows.size),
        _solver=solver,
    )


def assemble_dg_system(
    grid: SpaceTimeGrid, region: ControlRegion, q: float = DEFAULT_Q
) -> DiscreteSystem:
    """DG space-time system (implicit Euler, extra leading initial-value block)."""
    _check_q(q)
    idx = control_index_sets(grid, region)
    mass = assemble_mass(grid)
    stiff = assemble_stiffness(grid)
    omega = lumped_weights(grid)
    tau = grid.tau
    n_tau = grid.n_steps

    # full matrix on N_tau + 1 blocks; block 0 carries the initial condition
    shape_full = (n_tau + 1, n_tau + 1)
    eye_full = sp.identity(n_tau + 1, format="csr")
    sub_ones_full = sp.diags(np.ones(n_tau), -1, shape=shape_full, format="csr")
    tau_full = np.concatenate(([0.0], tau))
    L_T_full = (
        sp.kron(eye_full, mass)
        + sp.kron(sp.diags(tau_full, shape=shape_full), stiff)
        - sp.kron(sub_ones_full, mass)
    ).tocsr()

    # reduced matrix used by the predual solver (drop leading row and column)
    shape = (n_tau, n_tau)
    eye = sp.identity(n_tau, format="csr")
    sub_ones = sp.diags(np.ones(n_tau - 1), -1, shape=shape, format="csr")
    L_T_pre = (
        sp.kron(eye, mass)
        + sp.kron(sp.diags(tau, shape=shape), stiff)
        - sp.kron(sub_ones, mass)
    ).tocsr()

    rows, pairs = _dg_alpha_rows(grid, idx)
    tau_per_row = np.array([tau[k - 1] for (_, k) in pairs])
    solver = _BlockSolver(mass, stiff, tau, np.zeros(n_tau), -1.0)
    return DiscreteSystem(
        scheme="dg",
        grid=grid,
        region=region,
        index_sets=idx,
        p=_conjugate(q),
        q=q,
        mass=mass,
        stiffness=stiff,
        omega=omega,
        weights=_space_time_weights(grid, omega),
        L_T=L_T_full,
        L_T_pre=L_T_pre,
        alpha_rows=rows,
        alpha_pairs=pairs,
        beta_rows=idx.space.copy(),
        beta_nodes=idx.space.copy(),
        alpha_tau=tau_per_row,
        _solver=solver,
    )


def _conjugate(q: float) -> float:
    return 1.0 / (1.0 - 1.0 / q)


def _check_q(q: float) -> None:
    if not (1.0 < q <= 2.0):
        raise ValueError(f"exponent q must lie in (1, 2], got {q}")


def dump_matrices(system: DiscreteSystem, directory) -> None:
    """Write the assembled matrices in MatrixMarket coordinate format."""
    out = pathlib.Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(out / f"system_{system.scheme}.mtx", sp.coo_matrix(system.L_T))
    scipy.io.mmwrite(out / "mass.mtx", sp.coo_matrix(system.mass))
    scipy.io.mmwrite(out / "stiffness.mtx", sp.coo_matrix(system.stiffness))
