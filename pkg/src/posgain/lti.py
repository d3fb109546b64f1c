"""Discrete-time state-space systems, simulation and N-step lifting.

Signals are dense arrays of shape ``(K, channels)``: row ``k`` holds the
sample at time ``k``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidOrder
from .numkernel import as_matrix, is_schur_stable

__all__ = [
    "StateSpace",
    "LiftedSystem",
    "lift",
    "simulate",
    "pack_signal",
    "unpack_signal",
    "lifting_identities_check",
    "l2_norm",
    "is_nonnegative_signal",
]


def _block(M, rows, cols, name):
    if M is None:
        return np.zeros((rows, cols))
    M = np.array(M, dtype=float)
    if M.size == 0:
        return np.zeros((rows, cols))
    return as_matrix(M, name)


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``x(k+1) = A x(k) + B w(k)``, ``z(k) = C x(k) + D w(k)``, ``x(0) = 0``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        n = 0 if A.size == 0 else as_matrix(A, "A").shape[0]
        A = _block(A, n, n, "A")
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        D = as_matrix(self.D, "D")
        nz, nw = D.shape
        B = _block(self.B, n, nw, "B")
        C = _block(self.C, nz, n, "C")
        if B.shape != (n, nw):
            raise DimensionError(f"B must be {n}x{nw}, got {B.shape}")
        if C.shape != (nz, n):
            raise DimensionError(f"C must be {nz}x{n}, got {C.shape}")
        for name, M in zip("ABCD", (A, B, C, D)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def nw(self):
        return self.D.shape[1]

    @property
    def nz(self):
        return self.D.shape[0]

    def is_stable(self):
        return bool(is_schur_stable(self.A))

    def __eq__(self, other):
        if not isinstance(other, StateSpace):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in "ABCD")

    def __repr__(self):
        return f"StateSpace(n={self.n}, nw={self.nw}, nz={self.nz})"


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    order: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def as_statespace(self):
        return StateSpace(self.A, self.B, self.C, self.D)


def _powers(A, N):
    """``[I, A, A^2, ..., A^N]`` by repeated multiplication."""
    out = [np.eye(A.shape[0])]
    for _ in range(N):
        out.append(A @ out[-1])
    return out


def lift(sys, N):
    """N-th order lifting of `sys`.

    Returns ``(A^N, [A^{N-1}B ... AB B], [C; CA; ...; CA^{N-1}], Dhat)`` with
    ``Dhat`` the block lower-triangular Toeplitz matrix of Markov parameters.
    """
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidOrder(f"lifting order must be a positive integer, got {N!r}")
    N = int(N)
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n, nw, nz = sys.n, sys.nw, sys.nz
    Ak = _powers(A, N)
    hatA = Ak[N]
    hatB = np.hstack([Ak[N - 1 - j] @ B for j in range(N)]) if n else np.zeros((0, N * nw))
    hatC = np.vstack([C @ Ak[i] for i in range(N)]) if n else np.zeros((N * nz, 0))
    # Markov parameters h[0] = D, h[k] = C A^{k-1} B
    markov = [D] + [C @ Ak[k - 1] @ B for k in range(1, N)]
    hatD = np.zeros((N * nz, N * nw))
    for i in range(N):
        for j in range(i + 1):
            hatD[i * nz:(i + 1) * nz, j * nw:(j + 1) * nw] = markov[i - j]
    return LiftedSystem(N, hatA, hatB, hatC, hatD)


def _as_signal(w, channels, name):
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w.reshape(-1, 1) if channels == 1 else w.reshape(1, -1)
    if w.ndim != 2 or w.shape[1] != channels:
        raise DimensionError(
            f"{name} must have {channels} channels, got shape {w.shape}")
    return w


def simulate(sys, w, K=None):
    """Run the state recursion from ``x(0) = 0``.

    Parameters
    ----------
    sys : StateSpace or LiftedSystem
    w : array_like, shape (>=K, nw)
    K : int, optional
        Horizon; defaults to the length of `w`.

    Returns
    -------
    z : ndarray, shape (K, nz)
    x : ndarray, shape (K + 1, n)
        States ``x(0) ... x(K)``.
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    w = _as_signal(w, D.shape[1], "w")
    if K is None:
        K = w.shape[0]
    if w.shape[0] < K:
        raise DimensionError(f"input has {w.shape[0]} samples, horizon is {K}")
    x = np.zeros((K + 1, A.shape[0]))
    z = np.zeros((K, D.shape[0]))
    for k in range(K):
        z[k] = C @ x[k] + D @ w[k]
        x[k + 1] = A @ x[k] + B @ w[k]
    return z, x


def pack_signal(w, N):
    """Stack N consecutive samples into one lifted sample.

    A length not divisible by N is zero-padded at the tail, which matches
    truncation semantics (the padding carries no energy).
    """
    if N < 1:
        raise InvalidOrder(f"lifting order must be positive, got {N}")
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w.reshape(-1, 1)
    K, ch = w.shape
    Kp = -(-K // N) * N
    if Kp != K:
        w = np.vstack([w, np.zeros((Kp - K, ch))])
    return w.reshape(Kp // N, N * ch)


def unpack_signal(what, nw, N):
    """Inverse of `pack_signal` (the padded tail is retained)."""
    what = np.asarray(what, dtype=float)
    if what.ndim == 1:
        what = what.reshape(1, -1)
    if what.shape[1] != nw * N:
        raise DimensionError(f"lifted signal must have {nw * N} channels, got {what.shape[1]}")
    return what.reshape(what.shape[0] * N, nw)


def l2_norm(w):
    """Euclidean norm of a finite-horizon signal."""
    return float(np.sqrt(np.sum(np.square(w))))


def is_nonnegative_signal(w, tol=0.0):
    return bool(np.all(np.asarray(w) >= -tol))


def lifting_identities_check(sys, N1, N2, tol=1e-10):
    """Check that lifts of orders N1 and N2 compose into the order N1+N2 lift.

    Verifies ``A2 A1 = A12``, ``[A2 B1, B2] = B12``, ``[C1; C2 A1] = C12``
    and ``[[D1, 0], [C2 B1, D2]] = D12`` entrywise to `tol`, scaled by the
    magnitude of the reference block.
    """
    L1, L2, L12 = lift(sys, N1), lift(sys, N2), lift(sys, N1 + N2)
    nz_rows = L1.D.shape[0]
    composed = [
        (L2.A @ L1.A, L12.A),
        (np.hstack([L2.A @ L1.B, L2.B]), L12.B),
        (np.vstack([L1.C, L2.C @ L1.A]), L12.C),
        (np.block([[L1.D, np.zeros((nz_rows, L2.D.shape[1]))],
                   [L2.C @ L1.B, L2.D]]), L12.D),
    ]
    ok = True
    for got, ref in composed:
        if got.shape != ref.shape:
            return False
        if got.size:
            scale = 1.0 + np.max(np.abs(ref))
            ok = ok and bool(np.max(np.abs(got - ref)) <= tol * scale)
    return ok
