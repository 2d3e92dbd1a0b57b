"""Numba-accelerated kernels, loop style.

Selected by default; ``AIRCOMP_DISABLE_NUMBA=1`` switches the package to the
pure-numpy reference path in ``_numpy``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def chol_factor(A):
    M = A.shape[0]
    L = np.zeros((M, M), dtype=np.complex128)
    min_pivot = np.inf
    for j in range(M):
        acc = 0.0
        for p in range(j):
            acc += abs(L[j, p]) ** 2
        pivot = A[j, j].real - acc
        if pivot < min_pivot:
            min_pivot = pivot
        if pivot <= 0.0:
            L[j, j] = np.nan
            return L, min_pivot
        L[j, j] = np.sqrt(pivot)
        for i in range(j + 1, M):
            s = A[i, j]
            for p in range(j):
                s -= L[i, p] * np.conj(L[j, p])
            L[i, j] = s / L[j, j]
    return L, min_pivot


@njit(cache=True)
def chol_solve(L, b):
    M = L.shape[0]
    y = np.zeros(M, dtype=np.complex128)
    for i in range(M):
        s = b[i]
        for p in range(i):
            s -= L[i, p] * y[p]
        y[i] = s / L[i, i]
    x = np.zeros(M, dtype=np.complex128)
    for i in range(M - 1, -1, -1):
        s = y[i]
        for p in range(i + 1, M):
            s -= np.conj(L[p, i]) * x[p]
        x[i] = s / np.conj(L[i, i])
    return x


@njit(cache=True)
def accumulate_gram(H, w):
    D, M = H.shape
    G = np.zeros((M, M), dtype=np.complex128)
    for d in range(D):
        for i in range(M):
            hi = H[d, i] * w[d]
            for j in range(M):
                G[i, j] += hi * np.conj(H[d, j])
    return G


@njit(cache=True)
def mse_chunk(gains, own_idx, x, z):
    S, D = x.shape
    total = 0.0
    for s in range(S):
        err = -z[s]
        for d in range(D):
            err -= gains[d] * x[s, d]
        for t in range(own_idx.shape[0]):
            err += x[s, own_idx[t]]
        total += err.real ** 2 + err.imag ** 2
    return total


# -- log-barrier interior point solve for the SCA transmit subproblem --------
# Same contract and status codes as the reference in _numpy.py.

@njit(cache=True)
def _cone_slacks(z, S, s0, tcoef, r0):
    K = S.shape[0]
    D = (z.shape[0] - K) // 2
    cones = np.empty(K)
    for k in range(K):
        s = S[k] @ z + s0[k]
        r = tcoef[k] * z[2 * D + k] + r0[k]
        cones[k] = r * r - s @ s
    return cones


@njit(cache=True)
def _barrier_feasible(z, P, S, s0, tcoef, r0):
    K = S.shape[0]
    D = (z.shape[0] - K) // 2
    for d in range(D):
        if P - z[2 * d] ** 2 - z[2 * d + 1] ** 2 <= 0.0:
            return False
    for k in range(K):
        if z[2 * D + k] <= 0.0:
            return False
    cones = _cone_slacks(z, S, s0, tcoef, r0)
    for k in range(K):
        if cones[k] <= 0.0:
            return False
    return True


@njit(cache=True)
def _barrier_value(z, mu, coeff, P, S, s0, tcoef, r0):
    K = S.shape[0]
    D = (z.shape[0] - K) // 2
    val = 0.0
    for k in range(K):
        t = z[2 * D + k]
        if t <= 0.0:
            return np.inf
        val -= (coeff[k] + mu) * np.log(t)
    for d in range(D):
        g = P - z[2 * d] ** 2 - z[2 * d + 1] ** 2
        if g <= 0.0:
            return np.inf
        val -= mu * np.log(g)
    cones = _cone_slacks(z, S, s0, tcoef, r0)
    for k in range(K):
        if cones[k] <= 0.0:
            return np.inf
        val -= mu * np.log(cones[k])
    return val


@njit(cache=True)
def _barrier_grad_hess(z, mu, coeff, P, S, s0, G, tcoef, r0):
    K = S.shape[0]
    dim = z.shape[0]
    D = (dim - K) // 2
    grad = np.zeros(dim)
    hess = np.zeros((dim, dim))
    for k in range(K):
        i = 2 * D + k
        t = z[i]
        grad[i] = -(coeff[k] + mu) / t
        hess[i, i] = (coeff[k] + mu) / t ** 2
    for d in range(D):
        i = 2 * d
        x = z[i]
        y = z[i + 1]
        g = P - x * x - y * y
        g2 = g * g
        grad[i] += mu * 2.0 * x / g
        grad[i + 1] += mu * 2.0 * y / g
        hess[i, i] += mu * (2.0 / g + 4.0 * x * x / g2)
        hess[i + 1, i + 1] += mu * (2.0 / g + 4.0 * y * y / g2)
        off = mu * 4.0 * x * y / g2
        hess[i, i + 1] += off
        hess[i + 1, i] += off
    for k in range(K):
        s = S[k] @ z + s0[k]
        r = tcoef[k] * z[2 * D + k] + r0[k]
        c = r * r - s @ s
        dc = -2.0 * (S[k].T @ s)
        dc[2 * D + k] += 2.0 * r * tcoef[k]
        for i in range(dim):
            grad[i] -= (mu / c) * dc[i]
        hess += (2.0 * mu / c) * G[k]
        hess[2 * D + k, 2 * D + k] -= (2.0 * mu / c) * tcoef[k] ** 2
        for i in range(dim):
            dci = dc[i] * (mu / (c * c))
            for j in range(dim):
                hess[i, j] += dci * dc[j]
    return grad, hess


@njit(cache=True)
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
            tr = 0.0
            for i in range(dim):
                tr += hess[i, i]
            reg = 1e-13 * max(1.0, tr / dim)
            for i in range(dim):
                hess[i, i] += reg
            step = np.linalg.solve(hess, -grad)
            decrement = -(grad @ step)
            if decrement < 0.0:
                step = -grad
                decrement = grad @ grad
            if 0.5 * decrement < newton_tol:
                converged = True
                break
            f0 = _barrier_value(z, mu, coeff, P, S, s0, tcoef, r0)
            slope = grad @ step
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
