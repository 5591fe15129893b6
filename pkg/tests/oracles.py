"""Independent reference implementations used only by the tests.

Everything here deliberately avoids the package's assembly and solver paths:
matrices come from numerical quadrature of the basis functions, the space-time
operators from the literal block layout, and the predual problem is solved by
projected gradient descent on the box.
"""

import numpy as np


def gauss_points(a, b, n=5):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def hat(nodes, i, x):
    """Hat function on the full node list (boundary included), 1-based interior index."""
    xi = nodes[i]
    left, right = nodes[i - 1], nodes[i + 1]
    x = np.asarray(x, dtype=float)
    val = np.where(
        (x >= left) & (x <= xi),
        (x - left) / (xi - left),
        np.where((x > xi) & (x <= right), (right - x) / (right - xi), 0.0),
    )
    return val


def hat_deriv(nodes, i, x):
    xi = nodes[i]
    left, right = nodes[i - 1], nodes[i + 1]
    x = np.asarray(x, dtype=float)
    return np.where(
        (x >= left) & (x < xi),
        1.0 / (xi - left),
        np.where((x >= xi) & (x < right), -1.0 / (right - xi), 0.0),
    )


def quadrature_mass(grid):
    """Mass matrix from 5-point Gauss quadrature per element (exact for P1)."""
    nodes = np.concatenate(([grid.a], grid.x, [grid.b]))
    n = grid.x.size
    M = np.zeros((n, n))
    for e in range(len(nodes) - 1):
        xq, wq = gauss_points(nodes[e], nodes[e + 1])
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                M[i - 1, j - 1] += np.sum(wq * hat(nodes, i, xq) * hat(nodes, j, xq))
    return M


def quadrature_stiffness(grid):
    nodes = np.concatenate(([grid.a], grid.x, [grid.b]))
    n = grid.x.size
    A = np.zeros((n, n))
    for e in range(len(nodes) - 1):
        xq, wq = gauss_points(nodes[e], nodes[e + 1])
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                A[i - 1, j - 1] += np.sum(wq * hat_deriv(nodes, i, xq) * hat_deriv(nodes, j, xq))
    return A


def quadrature_lumped(grid):
    nodes = np.concatenate(([grid.a], grid.x, [grid.b]))
    n = grid.x.size
    w = np.zeros(n)
    for e in range(len(nodes) - 1):
        xq, wq = gauss_points(nodes[e], nodes[e + 1])
        for i in range(1, n + 1):
            w[i - 1] += np.sum(wq * hat(nodes, i, xq))
    return w


def dense_vd_matrix(M, A, tau):
    """The variational space-time matrix assembled block by block, densely."""
    n = M.shape[0]
    nt = len(tau)
    L = np.zeros((n * nt, n * nt))
    for k in range(nt):
        L[k * n : (k + 1) * n, k * n : (k + 1) * n] = M + 0.5 * tau[k] * A
        if k > 0:
            L[k * n : (k + 1) * n, (k - 1) * n : k * n] = -M + 0.5 * tau[k - 1] * A
    return L


def dense_dg_matrix(M, A, tau):
    """The DG space-time matrix with the leading initial-condition block."""
    n = M.shape[0]
    nt = len(tau)
    L = np.zeros((n * (nt + 1), n * (nt + 1)))
    L[:n, :n] = M
    for k in range(1, nt + 1):
        L[k * n : (k + 1) * n, k * n : (k + 1) * n] = M + tau[k - 1] * A
        L[k * n : (k + 1) * n, (k - 1) * n : k * n] = -M
    return L


def predual_value(system, yd, w):
    """Objective recomputed with dense algebra."""
    L = system.L_T_pre.toarray().T
    z = (L @ w) / system.weights
    p = system.p
    return np.sum((np.abs(z) ** p / p + z * yd) * system.weights)


def predual_gradient(system, yd, w):
    L = system.L_T_pre.toarray().T
    z = (L @ w) / system.weights
    return L.T @ (np.sign(z) * np.abs(z) ** (system.p - 1.0) + yd)


def projected_gradient(system, yd, alpha, beta=None, max_iter=1_000_000, tol=1e-13):
    """First-order oracle for the box-constrained predual (step-halving).

    Monotone projected gradient descent with backtracking; stops when the
    fixed-point residual of the projected step stalls below tol.
    """
    yd = np.asarray(yd, dtype=float)
    w = np.zeros(system.n_dofs)

    def project(v):
        out = v.copy()
        out[system.alpha_rows] = np.clip(out[system.alpha_rows], -alpha, alpha)
        if beta is not None:
            out[system.beta_rows] = np.clip(out[system.beta_rows], -beta, beta)
        return out

    def value_grad(v):
        z = system.lp_representative(v)
        val = np.sum((np.abs(z) ** system.p / system.p + z * yd) * system.weights)
        grad = system.apply_LT(np.sign(z) * np.abs(z) ** (system.p - 1.0) + yd)
        return val, grad

    val, grad = value_grad(w)
    step = 1.0
    for _ in range(max_iter):
        trial = project(w - step * grad)
        d = trial - w
        dnorm = float(np.max(np.abs(d), initial=0.0))
        if dnorm < tol * (1.0 + np.max(np.abs(w))):
            break
        tval, tgrad = value_grad(trial)
        if tval <= val - 1e-4 / step * np.dot(d, d):
            w, val, grad = trial, tval, tgrad
            step *= 1.3
        else:
            step *= 0.5
            if step < 2.0**-60:
                break
    return w


def central_difference(f, x, eps):
    return (f(x + eps) - f(x - eps)) / (2.0 * eps)
