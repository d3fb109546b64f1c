"""Dense linear-algebra kernels used throughout the package.

Everything here is a thin, validated layer over numpy: symmetric
eigendecomposition, spectral norm, Perron vector extraction and a
Lyapunov-based Schur stability test.
"""

from typing import NamedTuple, Optional

import numpy as np

from .errors import DimensionError, InvalidInput, NotNonnegative

__all__ = [
    "as_matrix",
    "as_sym",
    "sym_eig",
    "spectral_norm",
    "perron_vector",
    "is_schur_stable",
    "PerronVector",
    "StabilityCheck",
]


def as_matrix(M, name="matrix"):
    """Return `M` as a finite 2-D float array.

    Scalars become 1x1 and 1-D input becomes a single row.
    """
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    return arr


def as_sym(S, name="matrix"):
    """Validate a square matrix and return its exact symmetrization."""
    arr = as_matrix(S, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return 0.5 * (arr + arr.T)


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    V : ndarray
        Orthonormal eigenvectors stored as columns.
    """
    S = as_sym(S)
    if S.shape[0] < 1:
        raise InvalidInput("empty matrix")
    return np.linalg.eigh(S)


def spectral_norm(M):
    """Largest singular value of `M` (0 for an empty or zero matrix)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    M = as_matrix(M)
    return float(np.linalg.norm(M, 2))


class PerronVector(NamedTuple):
    vector: np.ndarray
    eigenvalue: float
    degenerate: bool


def perron_vector(Z, require_nonneg=True, tol=1e-9):
    """Unit eigenvector of the largest eigenvalue, sign-fixed to be nonnegative.

    For an entrywise-nonnegative symmetric `Z` Perron-Frobenius guarantees a
    nonnegative dominant eigenvector; tiny negative components left by
    rounding are clamped and the vector renormalized.  A numerically zero
    `Z` yields the first canonical basis vector with ``degenerate=True``.
    """
    Z = as_sym(Z)
    if require_nonneg:
        if np.min(Z) < -tol:
            raise NotNonnegative(
                f"matrix has entry {np.min(Z):.3g} below -{tol:g}")
        Z = np.maximum(Z, 0.0)
    n = Z.shape[0]
    scale = np.max(np.abs(Z)) if Z.size else 0.0
    if scale <= tol:
        e = np.zeros(n)
        e[0] = 1.0
        return PerronVector(e, 0.0, True)
    w, V = np.linalg.eigh(Z)
    v = V[:, -1]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    if require_nonneg:
        v = np.maximum(v, 0.0)
        v = v / np.linalg.norm(v)
    return PerronVector(v, float(w[-1]), False)


class StabilityCheck(NamedTuple):
    stable: bool
    P: Optional[np.ndarray]
    diagnostic: str

    def __bool__(self):
        return self.stable


def is_schur_stable(A, tol=1e-9):
    """Schur stability test through the discrete Lyapunov equation.

    Solves ``A.T @ P @ A - P = -I`` as a Kronecker-vectorized linear system.
    `A` is Schur stable iff the solution exists and is positive definite.
    The returned object is truthy when stable and carries `P` as witness.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"A must be square, got shape {A.shape}")
    if n == 0:
        return StabilityCheck(True, np.zeros((0, 0)), "empty state")
    # vec(A^T P A) = kron(A^T, A^T) vec(P) in column-major vec
    K = np.kron(A.T, A.T) - np.eye(n * n)
    rhs = -np.eye(n).reshape(-1, order="F")
    if np.linalg.cond(K) > 1e12:
        return StabilityCheck(False, None,
                              "singular Lyapunov operator (eigenvalue pair with product 1)")
    P = np.linalg.solve(K, rhs).reshape(n, n, order="F")
    P = 0.5 * (P + P.T)
    lmin = np.linalg.eigvalsh(P)[0]
    if not np.isfinite(lmin) or lmin <= tol:
        return StabilityCheck(False, None,
                              f"Lyapunov solution not positive definite (min eig {lmin:.3g})")
    return StabilityCheck(True, P, "ok")
