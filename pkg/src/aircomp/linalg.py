"""Minimal dense complex linear algebra used throughout the package.

Complex vectors/matrices are plain ``numpy.complex128`` arrays. The solver is
a self-contained Cholesky factorization (see ``aircomp.kernels``) so that the
same routine backs both the numeric path and the custom autodiff adjoint.
"""

import numpy as np

from . import kernels

HERMITIAN_TOL = 1e-10
PIVOT_RTOL = 1e-14


class NonHermitianError(ValueError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def as_cvec(x):
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    return v


def as_cmat(x):
    A = np.asarray(x, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def hermitian_solve(A, b):
    """Solve A x = b for Hermitian positive-definite A via Cholesky.

    Raises NonHermitianError if A deviates from A^H by more than
    HERMITIAN_TOL (relative to the largest entry), and SingularMatrixError
    when a pivot falls below PIVOT_RTOL times the largest diagonal entry.
    """
    A = as_cmat(A)
    b = as_cvec(b)
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {b.shape}")
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.conj().T).max() > HERMITIAN_TOL * scale:
        raise NonHermitianError("matrix is not Hermitian within tolerance")
    L, min_pivot = kernels.chol_factor(A)
    max_diag = float(np.abs(np.diag(A)).max())
    if not np.isfinite(min_pivot) or min_pivot <= PIVOT_RTOL * max_diag:
        raise SingularMatrixError(
            f"matrix numerically singular (pivot {min_pivot:.3e}, max diag {max_diag:.3e})"
        )
    return kernels.chol_solve(L, b)


def outer_accum(h, scale, acc):
    """Return acc + scale * h h^H (scale real >= 0); preserves Hermitian acc."""
    h = as_cvec(h)
    acc = as_cmat(acc)
    if acc.shape[0] != h.shape[0]:
        raise ValueError(f"dimension mismatch: {acc.shape} vs {h.shape}")
    return acc + scale * np.outer(h, h.conj())


def inner(a, b):
    """Conjugate-linear-in-first-argument inner product a^H b."""
    a = as_cvec(a)
    b = as_cvec(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))
