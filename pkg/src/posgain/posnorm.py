"""Bounds on the positive l2-induced norm of discrete-time LTI systems.

The positive norm restricts the supremum defining the l2-induced norm to
entrywise-nonnegative inputs.  Upper bounds come from the gain LMI

    L = blockdiag(-P, -g I + Q) + [A B; C D]^T blockdiag(P, I) [A B; C D] < 0

with ``g = gamma**2``, ``P`` PSD and ``Q`` in PSD + NN (an inner
approximation of the copositive cone), applied to the N-step lifted system.
Lower bounds come from the DNN relaxation of the positive matrix norm of the
lifted feedthrough ``Dhat_N`` and a Perron-vector rounding of its optimizer.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .cones import ConeKind, ConicProgram, Status, in_nn, in_psd, require, solve
from .errors import ColumnCountExceeded, DimensionError, SolverFailure, UnstableSystem
from .lti import lift
from .numkernel import as_matrix, is_schur_stable, perron_vector, spectral_norm

__all__ = [
    "GainCertificate",
    "LowerBoundWitness",
    "BoundRow",
    "BoundReport",
    "gain_lmi_matrix",
    "build_gain_lmi",
    "hinf_norm",
    "upper_bound_pos",
    "lower_bound_pos",
    "pos_matnorm_exact_small",
    "pos_matnorm_bruteforce",
    "verify_certificate",
    "theorem2_composition_check",
    "bound_sweep",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
RANK_ONE_GAP = 1e-6
CONE_TOL = 1e-9


@dataclass
class GainCertificate:
    """Witness that the positive norm of the order-N lift is below `gamma`."""

    gamma: float
    P: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    order: int = 1

    @property
    def Q(self):
        return self.Q1 + self.Q2


@dataclass
class LowerBoundWitness:
    order: int
    Z_star: np.ndarray
    v_star: np.ndarray
    value: float
    sdp_value: float
    rank_one_exact: bool
    perron_value: float
    degenerate: bool = False


@dataclass
class BoundRow:
    N: int
    upper: Optional[float]
    lower: Optional[float]
    error: str = ""


@dataclass
class BoundReport:
    hinf: float
    rows: List[BoundRow] = field(default_factory=list)
    certificates: dict = field(default_factory=dict)
    lower_witnesses: dict = field(default_factory=dict)

    @property
    def best_upper(self):
        vals = [r.upper for r in self.rows if r.upper is not None]
        return min(vals) if vals else None

    @property
    def best_lower(self):
        vals = [r.lower for r in self.rows if r.lower is not None]
        return max(vals) if vals else None

    @property
    def warnings(self):
        return [f"N={r.N}: {r.error}" for r in self.rows if r.error]

    def row(self, N):
        for r in self.rows:
            if r.N == N:
                return r
        raise KeyError(N)


# --------------------------------------------------------------------------
# gain LMI


def _quad(A, B, C, D):
    return np.block([[A, B], [C, D]])


def gain_lmi_matrix(A, B, C, D, P, Q, gamma):
    """Evaluate the gain LMI matrix at numeric ``P``, ``Q`` and ``gamma``."""
    n, nw = B.shape
    nz = C.shape[0]
    M = _quad(A, B, C, D)
    W = np.zeros((n + nz, n + nz))
    W[:n, :n] = P
    W[n:, n:] = np.eye(nz)
    L = M.T @ W @ M
    L[:n, :n] -= P
    L[n:, n:] += Q - gamma ** 2 * np.eye(nw)
    return 0.5 * (L + L.T)


def _check_quad(A, B, C, D):
    A, D = as_matrix(A, "A"), as_matrix(D, "D")
    n = A.shape[0]
    nz, nw = D.shape
    B = np.asarray(B, dtype=float).reshape(n, nw)
    C = np.asarray(C, dtype=float).reshape(nz, n)
    if A.shape != (n, n):
        raise DimensionError(f"A must be square, got {A.shape}")
    return A, B, C, D


def build_gain_lmi(A, B, C, D, gamma, with_q=True):
    """Feasibility program for the gain LMI at a fixed ``gamma``.

    Variables are ``P`` (PSD) and, when `with_q`, ``Q1`` (PSD) and ``Q2``
    (NN) with ``Q = Q1 + Q2``; without `with_q` the program is the standard
    bounded-real LMI.  The LMI itself is imposed as ``L <= -eps I``.
    """
    return _GainLmiFamily(A, B, C, D, with_q).at(gamma)


class _GainLmiFamily:
    """The gain LMI with gamma left free; `at` fixes it cheaply.

    ``gamma`` only enters the constant term, so the probed affine map is
    reused across bisection steps.
    """

    def __init__(self, A, B, C, D, with_q=True):
        self.prog = _build_gain_lmi(A, B, C, D, 0.0, with_q)
        n, nw = np.shape(B)
        self.shift = np.zeros((n + nw, n + nw))
        self.shift[n:, n:] = np.eye(nw)

    def at(self, gamma):
        lmi = self.prog.constraints[0]
        F0 = lmi.F0 - gamma ** 2 * self.shift
        new = dataclasses.replace(
            lmi, F0=F0, margin=1e-8 * (1.0 + np.linalg.norm(F0, 2)))
        return ConicProgram(self.prog.blocks, [new] + self.prog.constraints[1:],
                            dict(self.prog.objective))


def _build_gain_lmi(A, B, C, D, gamma, with_q=True):
    try:
        A, B, C, D = _check_quad(A, B, C, D)
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc
    n, nw = B.shape
    prog = ConicProgram()
    prog.sym_var("P", n)
    if with_q:
        prog.sym_var("Q1", nw)
        prog.sym_var("Q2", nw)

    def lmi(v):
        Q = v["Q1"] + v["Q2"] if with_q else np.zeros((nw, nw))
        return gain_lmi_matrix(A, B, C, D, v["P"], Q, gamma)

    prog.add_constraint(lmi, ConeKind.PSD, negated=True, strict=True, name="gain")
    prog.add_constraint(lambda v: v["P"], ConeKind.PSD, name="P")
    if with_q:
        prog.add_constraint(lambda v: v["Q1"], ConeKind.PSD, name="Q1")
        prog.add_constraint(lambda v: v["Q2"], ConeKind.NN, name="Q2")
    return prog


def _clean_certificate(values, gamma, order, nw):
    """Project solver output exactly onto the cones."""
    P = values["P"]
    w, V = np.linalg.eigh(P) if P.size else (np.zeros(0), P)
    P = (V * np.maximum(w, 0.0)) @ V.T if P.size else P
    if "Q1" in values:
        w, V = np.linalg.eigh(values["Q1"])
        Q1 = (V * np.maximum(w, 0.0)) @ V.T
        Q2 = np.maximum(values["Q2"], 0.0)
    else:
        Q1 = np.zeros((nw, nw))
        Q2 = np.zeros((nw, nw))
    return GainCertificate(gamma, 0.5 * (P + P.T), 0.5 * (Q1 + Q1.T), 0.5 * (Q2 + Q2.T), order)


@dataclass
class CertificateCheck:
    ok: bool
    reason: str
    lmi_max_eig: float = float("nan")

    def __bool__(self):
        return self.ok


def _check_lifted(lifted, cert, tol=CONE_TOL):
    if not in_psd(cert.P, tol * (1 + np.abs(cert.P).max(initial=0))):
        return CertificateCheck(False, "P is not positive semidefinite")
    if not in_psd(cert.Q1, tol * (1 + np.abs(cert.Q1).max(initial=0))):
        return CertificateCheck(False, "Q1 is not positive semidefinite")
    if not in_nn(cert.Q2, 0.0):
        return CertificateCheck(False, "Q2 is not entrywise nonnegative")
    L = gain_lmi_matrix(lifted.A, lifted.B, lifted.C, lifted.D, cert.P, cert.Q, cert.gamma)
    lmax = float(np.linalg.eigvalsh(L)[-1])
    if lmax > 0.0:
        return CertificateCheck(False, f"gain LMI not negative definite (max eig {lmax:.3g})", lmax)
    return CertificateCheck(True, "ok", lmax)


def verify_certificate(sys, cert):
    """Solver-free replay of a gain certificate on the order-`cert.order` lift.

    The returned object is truthy when every clause holds; otherwise its
    `reason` names the violated one.
    """
    try:
        lifted = lift(sys, cert.order)
        if cert.P.shape != (sys.n, sys.n) or cert.Q1.shape != (lifted.D.shape[1],) * 2 \
                or cert.Q2.shape != cert.Q1.shape:
            return CertificateCheck(False, "witness dimensions do not match the system")
    except ValueError as exc:
        return CertificateCheck(False, str(exc))
    return _check_lifted(lifted, cert)


def _certify_gamma(lifted, gamma, family):
    """Try to certify ``gamma``; return a replayed certificate or None."""
    prog = family.at(gamma)
    res = solve(prog)
    if res.status is Status.INFEASIBLE:
        return None, res
    if not res.ok:
        return None, res
    nw = lifted.D.shape[1]
    cert = _clean_certificate(res.values, gamma, getattr(lifted, "order", 1), nw)
    if not _check_lifted(lifted, cert):
        return None, res
    return cert, res


def _bisect(lifted, lo, hi_hint, tol, with_q):
    """Smallest certifiable gamma in ``[lo, ...)`` to relative width `tol`."""
    family = _GainLmiFamily(lifted.A, lifted.B, lifted.C, lifted.D, with_q)
    hi = max(hi_hint or 0.0, lo, 1e-6)
    cert = None
    fails = 0
    for _ in range(64):
        cert, res = _certify_gamma(lifted, hi, family)
        if cert is not None:
            break
        fails += res.status in (Status.MAX_ITERATIONS, Status.NUMERICAL_FAILURE)
        lo = max(lo, hi) if res.status is Status.INFEASIBLE else lo
        hi *= 2.0
    if cert is None:
        raise SolverFailure(f"no certifiable gamma found up to {hi:.3g}")
    while hi - lo > tol * (1.0 + hi):
        mid = 0.5 * (lo + hi)
        c, res = _certify_gamma(lifted, mid, family)
        if c is not None:
            hi, cert = mid, c
        else:
            # undecided solves are treated as infeasible: the bound stays certified
            if res.status not in (Status.INFEASIBLE,):
                log.debug("gamma=%.6g undecided (%s)", mid, res.message)
            lo = mid
    return hi, cert


def _require_stable(sys):
    if not is_schur_stable(sys.A):
        raise UnstableSystem("state matrix is not Schur stable")


def hinf_norm(sys, tol=DEFAULT_TOL):
    """l2-induced norm by bisection on the bounded-real LMI (``Q = 0``).

    The bracket starts at ``[||D||_2, doubling upward]`` and stops once its
    width is at most ``tol * (1 + gamma)``; the certified upper end is
    returned.
    """
    _require_stable(sys)
    lo = spectral_norm(sys.D)
    if sys.n == 0 or not np.any(sys.B) or not np.any(sys.C):
        return lo
    value, _ = _bisect(sys, lo, max(2.0 * lo, 1.0), tol, with_q=False)
    return value


def _basis_lower(Dhat):
    """Largest column norm: |Dhat e_j| for canonical basis vectors."""
    return float(np.max(np.linalg.norm(Dhat, axis=0))) if Dhat.size else 0.0


def upper_bound_pos(sys, N=1, tol=DEFAULT_TOL, hint=None):
    """Upper bound on the positive norm from the order-N lifted gain LMI.

    Parameters
    ----------
    sys : StateSpace
    N : int
        Lifting order.
    tol : float
        Relative bisection tolerance.
    hint : float, optional
        A gamma expected to be feasible (e.g. the bound of a divisor of
        `N`); it seeds the upper bracket and is re-validated.

    Returns
    -------
    value : float
    cert : GainCertificate
    """
    _require_stable(sys)
    lifted = lift(sys, N)
    lo = _basis_lower(lifted.D)
    value, cert = _bisect(lifted, lo, hint if hint else max(2.0 * lo, 1.0), tol, with_q=True)
    cert.order = N
    return value, cert


def _dnn_relaxation(M):
    """max trace(M Z) s.t. trace Z = 1, Z doubly nonnegative."""
    d = M.shape[0]
    prog = ConicProgram()
    prog.sym_var("Z", d)
    prog.add_constraint(lambda v: v["Z"], ConeKind.DNN, name="Z")
    prog.add_equality(lambda v: np.trace(v["Z"]), 1.0)
    prog.minimize({"Z": -M})
    return prog


def lower_bound_pos(sys, N=1, tol=DEFAULT_TOL, extra_candidates=()):
    """Lower bound on the positive norm from the lifted feedthrough matrix.

    Solves the DNN relaxation of ``max |Dhat_N v|^2`` over nonnegative unit
    ``v``, rounds its optimizer with the Perron vector, and keeps the best
    of that vector, the canonical basis vectors and `extra_candidates`.
    """
    Dhat = lift(sys, N).D if sys.n else np.kron(np.eye(N), sys.D)
    M = Dhat.T @ Dhat
    res = require(solve(_dnn_relaxation(M)), f"DNN relaxation at N={N}")
    if not res.ok:
        raise SolverFailure(f"DNN relaxation at N={N} reported {res.status.value}", res)
    Z = res.values["Z"]
    Z = 0.5 * (Z + Z.T)
    pv = perron_vector(np.maximum(Z, 0.0), require_nonneg=True)
    v = pv.vector
    perron_val = float(np.linalg.norm(Dhat @ v))
    best_val, best_v = perron_val, v
    m = Dhat.shape[1]
    for j in range(m):
        val = float(np.linalg.norm(Dhat[:, j]))
        if val > best_val:
            e = np.zeros(m)
            e[j] = 1.0
            best_val, best_v = val, e
    for cand in extra_candidates:
        cand = np.maximum(np.asarray(cand, dtype=float), 0.0)
        if cand.size < m:
            cand = np.concatenate([cand, np.zeros(m - cand.size)])
        nrm = np.linalg.norm(cand)
        if cand.size != m or nrm == 0:
            continue
        cand = cand / nrm
        val = float(np.linalg.norm(Dhat @ cand))
        if val > best_val:
            best_val, best_v = val, cand
    eig = np.linalg.eigvalsh(Z)
    rank_one = bool(eig[-1] > 0 and max(eig[-2], 0.0) / eig[-1] <= RANK_ONE_GAP) if len(eig) > 1 \
        else True
    sdp_value = math.sqrt(max(-res.objective, 0.0))
    wit = LowerBoundWitness(N, Z, best_v, best_val, sdp_value, rank_one, perron_val,
                            pv.degenerate)
    return best_val, wit


def pos_matnorm_exact_small(D):
    """Exact positive matrix norm for at most four columns.

    Minimizes ``g`` subject to ``g I - D^T D`` in PSD + NN, which equals the
    copositive cone in dimension <= 4.
    """
    D = as_matrix(D, "D")
    m = D.shape[1]
    if m > 4:
        raise ColumnCountExceeded(f"exact computation needs <= 4 columns, got {m}")
    M = D.T @ D
    prog = ConicProgram()
    prog.scalar_var("g")
    prog.add_constraint(lambda v: v["g"] * np.eye(m) - M, ConeKind.PSD_PLUS_NN, name="cop")
    prog.minimize({"g": 1.0})
    res = require(solve(prog), "exact positive matrix norm")
    return math.sqrt(max(res.objective, 0.0))


def pos_matnorm_bruteforce(M, samples=10000, rng=None):
    """Sampled lower bound on ``sup |M v|`` over nonnegative unit ``v``.

    Candidates: random nonnegative unit vectors, all canonical basis
    vectors, and the clamped top right singular vector.
    """
    M = as_matrix(M, "M")
    m = M.shape[1]
    if m > 20:
        raise DimensionError("pos_matnorm_bruteforce supports at most 20 columns")
    rng = np.random.default_rng(rng)
    cands = [np.eye(m)]
    if samples:
        R = np.abs(rng.standard_normal((samples, m)))
        # sparse supports matter for mixed-sign matrices
        R *= rng.random((samples, m)) < rng.uniform(0.2, 1.0, (samples, 1))
        cands.append(R)
    _, _, Vt = np.linalg.svd(M)
    for s in (1.0, -1.0):
        v = np.maximum(s * Vt[0], 0.0)
        if v.any():
            cands.append(v[None, :])
    X = np.vstack(cands)
    nrm = np.linalg.norm(X, axis=1)
    X = X[nrm > 0] / nrm[nrm > 0, None]
    return float(np.max(np.linalg.norm(X @ M.T, axis=1)))


def theorem2_composition_check(sys, N, p, cert):
    """Replay an order-N certificate at order ``p*N``.

    Keeps ``P`` and uses ``blockdiag(Q, ..., Q)`` (p copies) at the same
    gamma; the divisibility monotonicity of the upper bound rests on this
    construction being feasible.
    """
    if cert.order != N:
        return CertificateCheck(False, f"certificate is for order {cert.order}, not {N}")
    big = GainCertificate(cert.gamma, cert.P,
                          np.kron(np.eye(p), cert.Q1), np.kron(np.eye(p), cert.Q2), p * N)
    return verify_certificate(sys, big)


def bound_sweep(sys, N_max, tol=DEFAULT_TOL, lower=True):
    """Upper and lower bounds for lifting orders ``1..N_max``.

    Failures at a given N are recorded on its row and the sweep continues.
    Upper-bound bisections are seeded with the best bound among the
    divisors of N, and the lower bound at N also tries the previous best
    vector zero-padded, so reported lower bounds never decrease.
    """
    _require_stable(sys)
    report = BoundReport(hinf=hinf_norm(sys, tol))
    prev_v = None
    for N in range(1, N_max + 1):
        row = BoundRow(N, None, None)
        divisors = [report.row(d).upper for d in range(1, N) if N % d == 0
                    and report.row(d).upper is not None]
        hint = min(divisors) if divisors else report.hinf * (1.0 + 2.0 * tol)
        errors = []
        try:
            row.upper, cert = upper_bound_pos(sys, N, tol, hint=hint)
            report.certificates[N] = cert
        except SolverFailure as exc:
            errors.append(f"upper: {exc}")
        if lower:
            try:
                extra = [prev_v] if prev_v is not None else []
                row.lower, wit = lower_bound_pos(sys, N, tol, extra_candidates=extra)
                report.lower_witnesses[N] = wit
                prev_v = wit.v_star
            except SolverFailure as exc:
                errors.append(f"lower: {exc}")
        row.error = "; ".join(errors)
        report.rows.append(row)
        log.info("N=%d upper=%s lower=%s", N, row.upper, row.lower)
    return report
