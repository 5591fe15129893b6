"""Semismooth Newton solver for the box-constrained predual problem.

The problem is

    min_w  (1/p) sum |z|^p m + sum z yd m,   z = M^{-1} L w,  m = omega_j tau_k,
    s.t.   |w_i| <= alpha on the space-time constraint rows,
           |w_i| <= beta  on the initial-trace rows (optional),

whose KKT conditions are written with the complementarity max-reformulation

    N(lam, g) = max(0, lam + kappa g) - lam = 0,  g the constraint value,

for an arbitrary kappa > 0.  Newton steps use the generalized derivative that
always takes the differentiable branch at the kink.  The step is computed by
static condensation: active rows pin their coefficients to the bound, inactive
multipliers reset to zero, and one symmetric positive definite solve in the
free coefficients remains.  A multiple of the scaled residual times the lumped
mass is added to the Hessian block, which keeps the system regular when the
p-power term degenerates (p > 2 at z = 0) without spoiling the local rate.

Globalization has three layers: steps backtrack on the residual norm; when no
step length decreases the residual (a kink of the max functions where the
chosen branch disagrees with the one-sided derivative), the split is frozen
and the smooth convex restriction is descended on the objective until the
reduced gradient is small; and cold starts walk the bounds down from their
closed-form deactivation thresholds, warm-starting each stage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import DiscreteSystem
from .oracle import DesiredState

__all__ = [
    "SolverConfig",
    "PredualIterate",
    "KktResidual",
    "NewtonError",
    "objective",
    "kkt_residual",
    "generalized_jacobian",
    "newton_solve",
    "alpha_max",
]


class NewtonError(RuntimeError):
    """Solver failure carrying the best iterate and the iteration log."""

    def __init__(self, message, iterate=None, log=None):
        super().__init__(message)
        self.iterate = iterate
        self.log = log


@dataclass(frozen=True)
class SolverConfig:
    kappa: float = 1.0
    newton_tol: float = 1e-10
    feas_tol: float = 1e-9
    max_iter: int = 200
    reg_coeff: float = 1.0
    globalization: bool = True
    min_step: float = 2.0**-30
    init: str = "unconstrained"  # "unconstrained" (clipped closed form) or "zero"

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if self.newton_tol <= 0.0 or self.feas_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.init not in ("unconstrained", "zero"):
            raise ValueError(f"unknown init strategy {self.init!r}")


@dataclass
class PredualIterate:
    """Adjoint coefficients and constraint multipliers."""

    w: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    lam3: Optional[np.ndarray] = None
    lam4: Optional[np.ndarray] = None

    def copy(self) -> "PredualIterate":
        return PredualIterate(
            self.w.copy(),
            self.lam1.copy(),
            self.lam2.copy(),
            None if self.lam3 is None else self.lam3.copy(),
            None if self.lam4 is None else self.lam4.copy(),
        )


@dataclass(frozen=True)
class KktResidual:
    grad_w: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    n3: Optional[np.ndarray]
    n4: Optional[np.ndarray]
    norm: float


def _yd_flat(system: DiscreteSystem, y_d) -> np.ndarray:
    if isinstance(y_d, DesiredState):
        flat = y_d.flat()
    else:
        flat = np.asarray(y_d, dtype=float).ravel()
    if flat.size != system.n_dofs:
        raise ValueError(
            f"desired state has {flat.size} coefficients, system expects {system.n_dofs}"
        )
    return flat


def _power(z: np.ndarray, expo: float) -> np.ndarray:
    """sign(z) |z|^expo with a safe zero."""
    return np.sign(z) * np.abs(z) ** expo


def objective(system: DiscreteSystem, y_d, w: np.ndarray) -> float:
    """Lumped predual objective (1/p)||z||_p^p + <z, yd>."""
    yd = _yd_flat(system, y_d)
    w = np.asarray(w, dtype=float)
    if w.size != system.n_dofs:
        raise ValueError(f"w has {w.size} coefficients, system expects {system.n_dofs}")
    z = system.lp_representative(w)
    m = system.weights
    return float(np.sum((np.abs(z) ** system.p / system.p + z * yd) * m))


def zero_iterate(system: DiscreteSystem, with_beta: bool) -> PredualIterate:
    n_a = system.alpha_rows.size
    n_b = system.beta_rows.size
    return PredualIterate(
        w=np.zeros(system.n_dofs),
        lam1=np.zeros(n_a),
        lam2=np.zeros(n_a),
        lam3=np.zeros(n_b) if with_beta else None,
        lam4=np.zeros(n_b) if with_beta else None,
    )


def unconstrained_start(system: DiscreteSystem, yd, with_beta: bool) -> PredualIterate:
    """Unconstrained minimizer of the objective, with zero multipliers.

    Starting at w = 0 is degenerate for p > 2: the p-power term is cubically
    flat there, so the first residual has no first-order decrease along any
    regularized step.  The closed-form minimizer costs one backward solve and
    zeroes the stationarity block exactly; the residual lives only in the
    complementarity blocks of the violated bounds, which is precisely what the
    active-set step handles.  Clipping into the box would be counterproductive:
    kinks in the coefficients turn into large oscillations of the heat operator
    image that the p-power term amplifies.
    """
    it = zero_iterate(system, with_beta)
    z = -_power(np.asarray(yd, dtype=float), system.q - 1.0)
    it.w = system.solve_L(system.weights * z)
    return it


def kkt_residual(
    system: DiscreteSystem,
    y_d,
    iterate: PredualIterate,
    alpha: float,
    beta: Optional[float] = None,
    kappa: float = 1.0,
) -> KktResidual:
    """Stationarity and complementarity residual blocks and their joint norm."""
    yd = _yd_flat(system, y_d)
    w = iterate.w
    z = system.lp_representative(w)
    v = _power(z, system.p - 1.0) + yd
    grad = system.apply_LT(v)
    np.add.at(grad, system.alpha_rows, iterate.lam1 - iterate.lam2)

    wa = w[system.alpha_rows]
    n1 = np.maximum(0.0, iterate.lam1 + kappa * (wa - alpha)) - iterate.lam1
    n2 = np.maximum(0.0, iterate.lam2 + kappa * (-wa - alpha)) - iterate.lam2

    n3 = n4 = None
    if beta is not None:
        np.add.at(grad, system.beta_rows, iterate.lam3 - iterate.lam4)
        wb = w[system.beta_rows]
        n3 = np.maximum(0.0, iterate.lam3 + kappa * (wb - beta)) - iterate.lam3
        n4 = np.maximum(0.0, iterate.lam4 + kappa * (-wb - beta)) - iterate.lam4

    sq = np.dot(grad, grad) + np.dot(n1, n1) + np.dot(n2, n2)
    if beta is not None:
        sq += np.dot(n3, n3) + np.dot(n4, n4)
    return KktResidual(grad_w=grad, n1=n1, n2=n2, n3=n3, n4=n4, norm=float(np.sqrt(sq)))


def _hessian(system: DiscreteSystem, z: np.ndarray, reg: float) -> sp.csr_matrix:
    """L^T diag((p-1)|z|^{p-2} / m) L plus reg times the lumped diagonal."""
    d = (system.p - 1.0) * np.abs(z) ** (system.p - 2.0) / system.weights
    LT = system.L_T_pre
    H = (LT @ sp.diags(d)) @ LT.T
    if reg != 0.0:
        H = H + sp.diags(reg * system.weights)
    return H.tocsr()


def _selection(rows: np.ndarray, n: int) -> sp.csr_matrix:
    m = rows.size
    return sp.csr_matrix((np.ones(m), (np.arange(m), rows)), shape=(m, n))


def generalized_jacobian(
    system: DiscreteSystem,
    y_d,
    iterate: PredualIterate,
    alpha: float,
    beta: Optional[float] = None,
    kappa: float = 1.0,
) -> sp.csr_matrix:
    """One element of the generalized derivative of the KKT map.

    At kinks of the max functions the differentiable branch is chosen, so the
    active indicator is g >= 0.  For kappa = 1 the coupling between the
    coefficient block and active multiplier rows is symmetric.
    """
    w = iterate.w
    z = system.lp_representative(w)
    H = _hessian(system, z, 0.0)
    n = system.n_dofs

    Ra = _selection(system.alpha_rows, n)
    wa = w[system.alpha_rows]
    a1 = (iterate.lam1 + kappa * (wa - alpha) >= 0.0).astype(float)
    a2 = (iterate.lam2 + kappa * (-wa - alpha) >= 0.0).astype(float)

    blocks = [
        [H, Ra.T, -Ra.T],
        [kappa * sp.diags(a1) @ Ra, sp.diags(a1 - 1.0), None],
        [-kappa * sp.diags(a2) @ Ra, None, sp.diags(a2 - 1.0)],
    ]
    if beta is not None:
        Rb = _selection(system.beta_rows, n)
        wb = w[system.beta_rows]
        a3 = (iterate.lam3 + kappa * (wb - beta) >= 0.0).astype(float)
        a4 = (iterate.lam4 + kappa * (-wb - beta) >= 0.0).astype(float)
        blocks[0] += [Rb.T, -Rb.T]
        blocks[1] += [None, None]
        blocks[2] += [None, None]
        blocks.append([kappa * sp.diags(a3) @ Rb, None, None, sp.diags(a3 - 1.0), None])
        blocks.append([-kappa * sp.diags(a4) @ Rb, None, None, None, sp.diags(a4 - 1.0)])
    return sp.bmat(blocks, format="csr")


def _residual_stack(res: KktResidual) -> np.ndarray:
    parts = [res.grad_w, res.n1, res.n2]
    if res.n3 is not None:
        parts += [res.n3, res.n4]
    return np.concatenate(parts)


def _solve_spd(H: sp.csr_matrix, rhs: np.ndarray, banded_mem_limit: float = 1.5e9):
    """Solve the SPD condensed system, banded Cholesky first, sparse LU fallback."""
    n = H.shape[0]
    if n == 0:
        return rhs.copy()
    coo = H.tocoo()
    bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
    if (bw + 1) * n * 8 <= banded_mem_limit:
        ab = np.zeros((bw + 1, n))
        upper = coo.col >= coo.row
        ab[bw + coo.row[upper] - coo.col[upper], coo.col[upper]] = coo.data[upper]
        try:
            return scipy.linalg.solveh_banded(ab, rhs, lower=False)
        except scipy.linalg.LinAlgError:
            pass
    try:
        return spla.splu(H.tocsc()).solve(rhs)
    except RuntimeError as exc:
        raise NewtonError(f"singular condensed Newton system: {exc}") from exc


def _split_sets(system, iterate, alpha, beta, kappa):
    """Active/inactive split from the max-function branches (tie goes active).

    Returns the pinned mask, the pinned values, and the per-bound indicator
    arrays.  Simultaneous activation of both signs can only come from stale
    multiplier guesses; the stronger side wins.
    """
    w = iterate.w
    wa = w[system.alpha_rows]
    g1 = iterate.lam1 + kappa * (wa - alpha)
    g2 = iterate.lam2 + kappa * (-wa - alpha)
    a1 = g1 >= 0.0
    a2 = g2 >= 0.0
    both = a1 & a2
    if np.any(both):
        a1 = a1 & (~both | (g1 >= g2))
        a2 = a2 & (~both | (g2 > g1))

    n = system.n_dofs
    fixed = np.zeros(n, dtype=bool)
    target = np.zeros(n)
    fixed[system.alpha_rows[a1]] = True
    target[system.alpha_rows[a1]] = alpha
    fixed[system.alpha_rows[a2]] = True
    target[system.alpha_rows[a2]] = -alpha

    a3 = a4 = None
    if beta is not None:
        wb = w[system.beta_rows]
        g3 = iterate.lam3 + kappa * (wb - beta)
        g4 = iterate.lam4 + kappa * (-wb - beta)
        a3 = g3 >= 0.0
        a4 = g4 >= 0.0
        both_b = a3 & a4
        if np.any(both_b):
            a3 = a3 & (~both_b | (g3 >= g4))
            a4 = a4 & (~both_b | (g4 > g3))
        fixed[system.beta_rows[a3]] = True
        target[system.beta_rows[a3]] = beta
        fixed[system.beta_rows[a4]] = True
        target[system.beta_rows[a4]] = -beta
    return fixed, target, (a1, a2, a3, a4)


def _iterate_from(system, w, grad_pure, sets, beta) -> PredualIterate:
    """Multipliers read off the stationarity equation on the pinned rows."""
    a1, a2, a3, a4 = sets
    lam1 = np.zeros(system.alpha_rows.size)
    lam2 = np.zeros(system.alpha_rows.size)
    lam1[a1] = -grad_pure[system.alpha_rows[a1]]
    lam2[a2] = grad_pure[system.alpha_rows[a2]]
    lam3 = lam4 = None
    if beta is not None:
        lam3 = np.zeros(system.beta_rows.size)
        lam4 = np.zeros(system.beta_rows.size)
        lam3[a3] = -grad_pure[system.beta_rows[a3]]
        lam4[a4] = grad_pure[system.beta_rows[a4]]
    return PredualIterate(w, lam1, lam2, lam3, lam4)


def _k_value(system, yd, z) -> float:
    return float(np.sum((np.abs(z) ** system.p / system.p + z * yd) * system.weights))


def _pdas_candidate(system, yd, iterate, alpha, beta, reg, kappa):
    """Full semismooth Newton target: pin the active rows, solve for the rest.

    Equivalent to solving the generalized-Jacobian system after condensing the
    multiplier blocks; the new multipliers are read from the stationarity
    residual at the pinned rows.
    """
    w = iterate.w
    z = system.lp_representative(w)
    grad_pure = system.apply_LT(_power(z, system.p - 1.0) + yd)
    fixed, target, sets = _split_sets(system, iterate, alpha, beta, kappa)
    a1, a2, a3, a4 = sets

    H = _hessian(system, z, reg)
    b = H @ w - grad_pure

    w_new = target.copy()
    free_idx = np.nonzero(~fixed)[0]
    fixed_idx = np.nonzero(fixed)[0]
    if free_idx.size:
        rhs = b[free_idx]
        if fixed_idx.size:
            rhs = rhs - (H[free_idx][:, fixed_idx] @ target[fixed_idx])
        w_new[free_idx] = _solve_spd(H[free_idx][:, free_idx].tocsr(), rhs)

    s = b - H @ w_new
    lam1 = np.zeros_like(iterate.lam1)
    lam2 = np.zeros_like(iterate.lam2)
    lam1[a1] = s[system.alpha_rows[a1]]
    lam2[a2] = -s[system.alpha_rows[a2]]
    lam3 = lam4 = None
    if beta is not None:
        lam3 = np.zeros_like(iterate.lam3)
        lam4 = np.zeros_like(iterate.lam4)
        lam3[a3] = s[system.beta_rows[a3]]
        lam4[a4] = -s[system.beta_rows[a4]]
    return PredualIterate(w_new, lam1, lam2, lam3, lam4), fixed, target, sets


def _axpy(iterate: PredualIterate, other: PredualIterate, s: float) -> PredualIterate:
    return PredualIterate(
        iterate.w + s * (other.w - iterate.w),
        iterate.lam1 + s * (other.lam1 - iterate.lam1),
        iterate.lam2 + s * (other.lam2 - iterate.lam2),
        None if iterate.lam3 is None else iterate.lam3 + s * (other.lam3 - iterate.lam3),
        None if iterate.lam4 is None else iterate.lam4 + s * (other.lam4 - iterate.lam4),
    )


def newton_solve(
    system: DiscreteSystem,
    y_d,
    alpha: float,
    beta: Optional[float] = None,
    config: Optional[SolverConfig] = None,
    warm_start: Optional[PredualIterate] = None,
):
    """Solve the predual problem; returns (iterate, iteration log).

    Cold starts walk the bounds down from their deactivation thresholds in a
    short geometric continuation, re-solving with the previous iterate; this
    keeps the active set small and correct along the way, which the plain
    damped iteration needs on fine grids.  A provided warm start skips the
    continuation.  The log is a list of dicts with keys iter, residual, step,
    active_alpha, active_beta; iterations are numbered consecutively across
    continuation stages.  Raises NewtonError (carrying the best iterate and
    the log) when max_iter is exhausted.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive here; alpha = 0 has a closed form")
    if beta is not None and beta <= 0.0:
        raise ValueError("beta must be positive or disabled (None)")
    cfg = config or SolverConfig()
    yd = _yd_flat(system, y_d)

    if warm_start is not None or cfg.init == "zero":
        return _newton_stage(system, yd, alpha, beta, cfg, warm_start, [])

    a_bar, b_bar, w_unc = alpha_max(system, y_d)
    it = zero_iterate(system, beta is not None)
    it.w = w_unc
    ratio = max(
        a_bar / alpha if a_bar > alpha else 1.0,
        (b_bar / beta) if (beta is not None and b_bar > beta) else 1.0,
    )
    n_stages = min(12, int(np.ceil(np.log2(ratio)))) if ratio > 1.0 else 0
    log: list = []
    loose = replace_tol(cfg, min(1e-6, cfg.newton_tol * 1e4))
    for i in range(n_stages - 1, 0, -1):
        frac = 2.0**i
        a_i = max(alpha, min(a_bar, alpha * frac))
        b_i = None if beta is None else max(beta, min(b_bar, beta * frac))
        it, log = _newton_stage(system, yd, a_i, b_i, loose, it, log)
    return _newton_stage(system, yd, alpha, beta, cfg, it, log)


def replace_tol(cfg: SolverConfig, tol: float) -> SolverConfig:
    return replace(cfg, newton_tol=tol)


def _newton_stage(system, yd, alpha, beta, cfg, warm_start, log):
    scale = 1.0 + float(np.linalg.norm(system.apply_LT(yd)))
    tol = cfg.newton_tol * scale

    if warm_start is not None:
        it = warm_start.copy() if isinstance(warm_start, PredualIterate) else warm_start
    elif cfg.init == "unconstrained":
        it = unconstrained_start(system, yd, beta is not None)
    else:
        it = zero_iterate(system, beta is not None)
    res = kkt_residual(system, yd, it, alpha, beta, cfg.kappa)
    offset = len(log)
    best = (res.norm, it.copy())
    k = 0

    # main loop: full active-set Newton steps backtracked on the residual.
    # When no step length decreases the residual (a branch kink of the max
    # functions), the current split is frozen and the smooth restriction is
    # descended on the objective instead, which always makes progress; the
    # active-set stepping then resumes.
    while k < cfg.max_iter:
        if res.norm <= tol:
            _check_solution(system, it, alpha, beta, cfg, scale)
            if not log or log[-1]["residual"] != res.norm:
                log.append(_log_row(offset + k, res.norm, 0.0, system, it, alpha, beta, cfg))
            return it, log

        reg = cfg.reg_coeff * res.norm / scale
        candidate, fixed, target, sets = _pdas_candidate(
            system, yd, it, alpha, beta, reg, cfg.kappa
        )
        accepted = None
        step = 1.0
        if cfg.globalization:
            while step >= cfg.min_step:
                trial = _axpy(it, candidate, step) if step != 1.0 else candidate
                trial_res = kkt_residual(system, yd, trial, alpha, beta, cfg.kappa)
                if trial_res.norm <= (1.0 - 1e-4 * step) * res.norm:
                    accepted = (trial, trial_res)
                    break
                step *= 0.5
        else:
            candidate_res = kkt_residual(system, yd, candidate, alpha, beta, cfg.kappa)
            accepted = (candidate, candidate_res)

        if accepted is not None:
            it, res = accepted
            log.append(_log_row(offset + k, res.norm, step, system, it, alpha, beta, cfg))
            k += 1
            if res.norm < best[0]:
                best = (res.norm, it.copy())
            continue

        # kink: descend the objective on the frozen split until the reduced
        # gradient drops well below the residual at the jam, then resume
        free_idx = np.nonzero(~fixed)[0]
        w = it.w.copy()
        w[fixed] = target[fixed]
        goal = max(0.1 * res.norm, 0.5 * tol)
        while k < cfg.max_iter:
            z = system.lp_representative(w)
            grad_pure = system.apply_LT(_power(z, system.p - 1.0) + yd)
            it = _iterate_from(system, w, grad_pure, sets, beta)
            res = kkt_residual(system, yd, it, alpha, beta, cfg.kappa)
            log.append(_log_row(offset + k, res.norm, -1.0, system, it, alpha, beta, cfg))
            k += 1
            if res.norm < best[0]:
                best = (res.norm, it.copy())
            g_free = grad_pure[free_idx]
            g_norm = float(np.linalg.norm(g_free))
            if res.norm <= tol or g_norm <= goal:
                break
            reg = cfg.reg_coeff * min(res.norm, g_norm) / scale
            H = _hessian(system, z, reg)
            d = np.zeros_like(w)
            d[free_idx] = _solve_spd(H[free_idx][:, free_idx].tocsr(), -g_free)
            slope = float(np.dot(g_free, d[free_idx]))
            k_now = _k_value(system, yd, z)
            step = 1.0
            while step >= cfg.min_step:
                z_trial = system.lp_representative(w + step * d)
                if _k_value(system, yd, z_trial) <= k_now + 1e-4 * step * slope:
                    break
                step *= 0.5
            else:
                raise NewtonError(
                    f"descent line search failed at iteration {k} "
                    f"(residual {res.norm:.3e})",
                    iterate=best[1],
                    log=log,
                )
            w = w + step * d

    if res.norm <= tol:
        _check_solution(system, it, alpha, beta, cfg, scale)
        return it, log
    raise NewtonError(
        f"no convergence in {cfg.max_iter} iterations (residual {res.norm:.3e}, "
        f"target {tol:.3e})",
        iterate=best[1],
        log=log,
    )


def _log_row(k, norm, step, system, it, alpha, beta, cfg, n_act_a=None, n_act_b=None):
    if n_act_a is None:
        wa = it.w[system.alpha_rows]
        n_act_a = int(
            np.count_nonzero(it.lam1 + cfg.kappa * (wa - alpha) >= 0.0)
            + np.count_nonzero(it.lam2 + cfg.kappa * (-wa - alpha) >= 0.0)
        )
    if n_act_b is None:
        n_act_b = 0
        if beta is not None:
            wb = it.w[system.beta_rows]
            n_act_b = int(
                np.count_nonzero(it.lam3 + cfg.kappa * (wb - beta) >= 0.0)
                + np.count_nonzero(it.lam4 + cfg.kappa * (-wb - beta) >= 0.0)
            )
    return {
        "iter": k,
        "residual": norm,
        "step": step,
        "active_alpha": n_act_a,
        "active_beta": n_act_b,
    }


def _check_solution(system, it, alpha, beta, cfg, scale=1.0):
    # loose continuation stages carry proportionally loose feasibility slack
    tol = max(cfg.feas_tol, 10.0 * cfg.newton_tol * scale)
    wa = it.w[system.alpha_rows]
    if wa.size and np.max(np.abs(wa)) > alpha + tol:
        raise NewtonError("converged iterate violates the alpha bounds")
    if np.min(it.lam1, initial=0.0) < -tol or np.min(it.lam2, initial=0.0) < -tol:
        raise NewtonError("converged iterate has negative multipliers")
    if beta is not None:
        wb = it.w[system.beta_rows]
        if wb.size and np.max(np.abs(wb)) > beta + tol:
            raise NewtonError("converged iterate violates the beta bounds")
        if np.min(it.lam3, initial=0.0) < -tol or np.min(it.lam4, initial=0.0) < -tol:
            raise NewtonError("converged iterate has negative multipliers")


def alpha_max(system: DiscreteSystem, y_d):
    """Smallest bounds that deactivate all constraints.

    The unconstrained predual minimizer solves L w = M sign(-yd) |yd|^{q-1}
    in closed form; its extremal values over the constraint rows are the
    thresholds above which the optimal control vanishes.  Returns
    (alpha_bar, beta_bar, w_unconstrained).
    """
    yd = _yd_flat(system, y_d)
    z = -_power(yd, system.q - 1.0)
    w = system.solve_L(system.weights * z)
    alpha_bar = float(np.max(np.abs(w[system.alpha_rows])))
    beta_bar = float(np.max(np.abs(w[system.beta_rows])))
    return alpha_bar, beta_bar, w
