"""Pure-numpy reference implementations of the hot kernels.

These are the fallback path selected by ``AIRCOMP_DISABLE_NUMBA=1`` and the
ground truth the numba variants are benchmarked and tested against.
"""

import numpy as np


def chol_factor(A):
    """Lower Cholesky factor of a Hermitian positive-definite matrix.

    Returns (L, min_pivot) where min_pivot is the smallest diagonal pivot
    encountered before taking the square root; the caller decides whether
    the factorization is acceptable.
    """
    M = A.shape[0]
    L = np.zeros((M, M), dtype=np.complex128)
    min_pivot = np.inf
    for j in range(M):
        pivot = A[j, j].real - np.sum(np.abs(L[j, :j]) ** 2)
        min_pivot = min(min_pivot, pivot)
        if pivot <= 0.0:
            L[j, j] = np.nan
            return L, min_pivot
        L[j, j] = np.sqrt(pivot)
        if j + 1 < M:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j].conj()) / L[j, j]
    return L, min_pivot


def chol_solve(L, b):
    """Solve A x = b given the lower Cholesky factor L of A."""
    M = L.shape[0]
    y = np.zeros(M, dtype=np.complex128)
    for i in range(M):
        y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
    x = np.zeros(M, dtype=np.complex128)
    for i in range(M - 1, -1, -1):
        x[i] = (y[i] - L[i + 1:, i].conj() @ x[i + 1:]) / L[i, i].conj()
    return x


def accumulate_gram(H, w):
    """Sum of w[d] * h_d h_d^H over the rows h_d of H (weights real)."""
    return (H.T * w) @ H.conj()


def mse_chunk(gains, own_idx, x, z):
    """Sum over samples of |sum_{own} x - (gains . x + z)|^2.

    gains : complex (D,) effective end-to-end coefficients per device
    own_idx : int64 indices of the in-cluster devices
    x : complex (S, D) transmitted symbols
    z : complex (S,) post-beamforming noise samples
    """
    target = x[:, own_idx].sum(axis=1)
    est = x @ gains + z
    return float(np.sum(np.abs(target - est) ** 2))


# -- log-barrier interior point solve for the SCA transmit subproblem --------
#
# Variables z = (Re u_1, Im u_1, ..., Re u_D, Im u_D, t_1..t_K). Minimizes
#   -sum_k coeff_k ln(t_k) + mu * [power, t, and SOC barrier terms]
# with mu staged down by mu_factor until n_constraints * mu < gap_tol.
# Status codes: 0 converged, 1 infeasible start, 2 line search stalled,
# 3 Newton iteration cap.

def _cone_slacks(z, S, s0, tcoef, r0):
    K = S.shape[0]
    D = (z.shape[0] - K) // 2
    t = z[2 * D:]
    s = S @ z + s0                      # (K, 2D+1)
    r = tcoef * t + r0
    return r * r - np.einsum("ki,ki->k", s, s)


def _barrier_feasible(z, P, S, s0, tcoef, r0):
    K = S.shape[0]
    D = (z.shape[0] - K) // 2
    power = P - z[0:2 * D:2] ** 2 - z[1:2 * D:2] ** 2
    t = z[2 * D:]
    if power.min() <= 0 or t.min() <= 0:
        return False
    return _cone_slacks(z, S, s0, tcoef, r0).min() > 0


def _barrier_value(z, mu, coeff, P, S, s0, tcoef, r0):
    K = S.shape[0]
    D = (z.shape[0] - K) // 2
    power = P - z[0:2 * D:2] ** 2 - z[1:2 * D:2] ** 2
    t = z[2 * D:]
    if power.min() <= 0 or t.min() <= 0:
        return np.inf
    cones = _cone_slacks(z, S, s0, tcoef, r0)
    if cones.min() <= 0:
        return np.inf
    return float(-(coeff + mu) @ np.log(t) - mu * np.log(power).sum()
                 - mu * np.log(cones).sum())


def _barrier_grad_hess(z, mu, coeff, P, S, s0, G, tcoef, r0):
    K = S.shape[0]
    dim = z.shape[0]
    D = (dim - K) // 2
    ix = np.arange(0, 2 * D, 2)
    iy = ix + 1
    it = np.arange(2 * D, dim)
    grad = np.zeros(dim)
    hess = np.zeros((dim, dim))
    t = z[it]
    grad[it] = -(coeff + mu) / t
    hess[it, it] = (coeff + mu) / t ** 2
    x, y = z[ix], z[iy]
    gpow = P - x * x - y * y
    g2 = gpow ** 2
    grad[ix] = mu * 2.0 * x / gpow
    grad[iy] = mu * 2.0 * y / gpow
    hess[ix, ix] += mu * (2.0 / gpow + 4.0 * x * x / g2)
    hess[iy, iy] += mu * (2.0 / gpow + 4.0 * y * y / g2)
    off = mu * 4.0 * x * y / g2
    hess[ix, iy] += off
    hess[iy, ix] += off
    for k in range(K):
        s = S[k] @ z + s0[k]
        r = tcoef[k] * t[k] + r0[k]
        c = r * r - s @ s
        dc = -2.0 * (S[k].T @ s)
        dc[2 * D + k] += 2.0 * r * tcoef[k]
        grad -= (mu / c) * dc
        hess += (2.0 * mu / c) * G[k]
        hess[2 * D + k, 2 * D + k] -= (2.0 * mu / c) * tcoef[k] ** 2
        hess += (mu / c ** 2) * dc[:, None] * dc[None, :]
    return grad, hess


def barrier_solve(z0, coeff, P, S, s0, G, tcoef, r0,
                  mu0, mu_factor, gap_tol, newton_tol, max_newton,
                  armijo_slope, backtrack):
    if not _barrier_feasible(z0, P, S, s0, tcoef, r0):
        return z0, 1
    K = S.shape[0]
    dim = z0.shape[0]
    D = (dim - K) // 2
    n_constraints = D + 2 * K
    z = z0.copy()
    mu = mu0
    while True:
        converged = False
        for _ in range(max_newton):
            grad, hess = _barrier_grad_hess(z, mu, coeff, P, S, s0, G, tcoef, r0)
            reg = 1e-13 * max(1.0, np.trace(hess) / dim)
            hess[np.arange(dim), np.arange(dim)] += reg
            step = np.linalg.solve(hess, -grad)
            decrement = float(-grad @ step)
            if decrement < 0:
                step = -grad
                decrement = float(grad @ grad)
            if 0.5 * decrement < newton_tol:
                converged = True
                break
            f0 = _barrier_value(z, mu, coeff, P, S, s0, tcoef, r0)
            slope = float(grad @ step)
            alpha = 1.0
            accepted = False
            for _ in range(60):
                cand = z + alpha * step
                if _barrier_value(cand, mu, coeff, P, S, s0, tcoef, r0) \
                        <= f0 + armijo_slope * alpha * slope:
                    accepted = True
                    break
                alpha *= backtrack
            if not accepted:
                return z, 2
            z = z + alpha * step
        if not converged:
            return z, 3
        if n_constraints * mu < gap_tol:
            return z, 0
        mu /= mu_factor
