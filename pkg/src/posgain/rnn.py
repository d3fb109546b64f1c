"""Finite-gain l2 stability of ReLU recurrent networks.

The network

    x(k+1) = Lambda x(k) + Win w(k) + v(k)
    z(k)   = Wout x(k)
    w(k)   = relu(z(k) + s(k)),      x(0) = 0

is a feedback loop of an LTI system with the ReLU nonlinearity.  Because
ReLU outputs are nonnegative, the loop only ever feeds nonnegative signals
into ``G0 = (Lambda, Win, Wout, 0)``; a copositive multiplier ``Q`` in the
scaled small-gain LMI exploits exactly that.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .cones import INFEASIBILITY_THRESHOLD, ConeKind, ConicProgram, Status, solve
from .errors import DimensionError, SolverFailure, UnstableSystem
from .lti import StateSpace
from .numkernel import as_matrix, is_schur_stable, spectral_norm
from .posnorm import DEFAULT_TOL, hinf_norm, upper_bound_pos

__all__ = [
    "RnnModel",
    "RnnTemplate",
    "StabilityVerdict",
    "SweepCell",
    "relu",
    "subsystems",
    "simulate_rnn",
    "ssg_lmi",
    "ssg_lmi_matrix",
    "certify",
    "certified_gain_formula",
    "gain_combination_lemma_check",
    "region_sweep",
    "paper_template",
]

log = logging.getLogger(__name__)

S_FLOOR = 1e-6


def relu(v):
    return np.maximum(np.asarray(v, dtype=float), 0.0)


@dataclass(frozen=True, eq=False)
class RnnModel:
    Lambda: np.ndarray
    Win: np.ndarray
    Wout: np.ndarray

    def __post_init__(self):
        L = as_matrix(self.Lambda, "Lambda")
        Win = as_matrix(self.Win, "Win")
        Wout = as_matrix(self.Wout, "Wout")
        n = L.shape[0]
        if L.shape != (n, n):
            raise DimensionError(f"Lambda must be square, got {L.shape}")
        m = Wout.shape[0]
        if Win.shape != (n, m):
            raise DimensionError(f"Win must be {n}x{m}, got {Win.shape}")
        if Wout.shape != (m, n):
            raise DimensionError(f"Wout must be {m}x{n}, got {Wout.shape}")
        if not is_schur_stable(L):
            raise UnstableSystem("Lambda is not Schur stable")
        for name, M in (("Lambda", L), ("Win", Win), ("Wout", Wout)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def n(self):
        return self.Lambda.shape[0]

    @property
    def m(self):
        return self.Wout.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RnnModel):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("Lambda", "Win", "Wout"))


def subsystems(rnn):
    """``(G, G0, G1)``: the LTI part with inputs ``(w, v)``, ``w`` only, ``v`` only."""
    n, m = rnn.n, rnn.m
    G = StateSpace(rnn.Lambda, np.hstack([rnn.Win, np.eye(n)]), rnn.Wout,
                   np.zeros((m, m + n)))
    G0 = StateSpace(rnn.Lambda, rnn.Win, rnn.Wout, np.zeros((m, m)))
    G1 = StateSpace(rnn.Lambda, np.eye(n), rnn.Wout, np.zeros((m, n)))
    return G, G0, G1


def simulate_rnn(rnn, s, v, K=None):
    """Simulate the closed loop from ``x(0) = 0``.

    Returns
    -------
    x : ndarray, shape (K + 1, n)
    z : ndarray, shape (K, m)
    w : ndarray, shape (K, m)
        Entrywise nonnegative.
    """
    s = np.asarray(s, dtype=float).reshape(-1, rnn.m) if np.ndim(s) == 1 and rnn.m == 1 \
        else np.asarray(s, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1, rnn.n) if np.ndim(v) == 1 and rnn.n == 1 \
        else np.asarray(v, dtype=float)
    if s.ndim != 2 or s.shape[1] != rnn.m:
        raise DimensionError(f"s must have {rnn.m} channels, got shape {s.shape}")
    if v.ndim != 2 or v.shape[1] != rnn.n:
        raise DimensionError(f"v must have {rnn.n} channels, got shape {v.shape}")
    if K is None:
        K = min(len(s), len(v))
    if len(s) < K or len(v) < K:
        raise DimensionError(f"inputs shorter than horizon {K}")
    x = np.zeros((K + 1, rnn.n))
    z = np.zeros((K, rnn.m))
    w = np.zeros((K, rnn.m))
    for k in range(K):
        z[k] = rnn.Wout @ x[k]
        w[k] = relu(z[k] + s[k])
        x[k + 1] = rnn.Lambda @ x[k] + rnn.Win @ w[k] + v[k]
    return x, z, w


def ssg_lmi_matrix(rnn, P, S, Q):
    """blockdiag(-P, -S + Q) + M^T blockdiag(P, S) M with M = [Lambda Win; Wout 0]."""
    n, m = rnn.n, rnn.m
    M = np.block([[rnn.Lambda, rnn.Win], [rnn.Wout, np.zeros((m, m))]])
    W = np.zeros((n + m, n + m))
    W[:n, :n] = P
    W[n:, n:] = S
    L = M.T @ W @ M
    L[:n, :n] -= P
    L[n:, n:] += Q - S
    return 0.5 * (L + L.T)


def ssg_lmi(rnn, with_cop):
    """Scaled small-gain feasibility program.

    ``P`` is PSD, ``S`` diagonal with ``S >= 1e-6 I``; with `with_cop` the
    multiplier ``Q = Q1 + Q2`` (PSD plus NN) is free, otherwise ``Q = 0``.
    """
    n, m = rnn.n, rnn.m
    prog = ConicProgram()
    prog.sym_var("P", n)
    prog.diag_var("S", m)
    if with_cop:
        prog.sym_var("Q1", m)
        prog.sym_var("Q2", m)

    def lmi(v):
        Q = v["Q1"] + v["Q2"] if with_cop else np.zeros((m, m))
        return ssg_lmi_matrix(rnn, v["P"], v["S"], Q)

    prog.add_constraint(lmi, ConeKind.PSD, negated=True, strict=True, name="ssg")
    prog.add_constraint(lambda v: v["P"], ConeKind.PSD, name="P")
    prog.add_constraint(lambda v: v["S"], ConeKind.PSD, margin=S_FLOOR, name="S")
    if with_cop:
        prog.add_constraint(lambda v: v["Q1"], ConeKind.PSD, name="Q1")
        prog.add_constraint(lambda v: v["Q2"], ConeKind.NN, name="Q2")
    return prog


def _replay(rnn, values):
    """Re-check an SSG(+COP) witness without the solver."""
    P, S = values["P"], values["S"]
    Q = values.get("Q1", 0.0) + values.get("Q2", 0.0) if "Q1" in values \
        else np.zeros((rnn.m, rnn.m))
    if np.linalg.eigvalsh(P)[0] < -1e-9 * (1 + np.abs(P).max()):
        return False
    if np.min(np.diag(S)) <= 0:
        return False
    if "Q1" in values:
        if np.linalg.eigvalsh(values["Q1"])[0] < -1e-9 * (1 + np.abs(values["Q1"]).max()):
            return False
        if np.min(values["Q2"]) < -1e-9 * (1 + np.abs(values["Q2"]).max()):
            return False
    return bool(np.linalg.eigvalsh(ssg_lmi_matrix(rnn, P, S, Q))[-1] < 0)


def _feasible(rnn, with_cop):
    """(verdict, witness, message); verdict None means undecided."""
    res = solve(ssg_lmi(rnn, with_cop))
    if res.status is Status.INFEASIBLE:
        return False, None, res.message
    if res.ok and _replay(rnn, res.values):
        return True, res.values, res.message
    if res.ok and res.infeasibility >= -INFEASIBILITY_THRESHOLD:
        # The program is homogeneous: a strictly feasible point would drive
        # the phase-one shift to its floor, so a shift of ~0 means the
        # strict LMI has no solution at solver precision.
        return False, None, f"boundary case, phase-one shift {res.infeasibility:.3g}"
    return None, None, f"{res.status.value}: {res.message}"


def certified_gain_formula(gamma0_plus, gamma1):
    """sqrt(2) * ||[[g0/(1-g0), g1/(1-g0)], [1/(1-g0), g1/(1-g0)]]||_2, or inf."""
    if gamma0_plus >= 1.0:
        return math.inf
    k = 1.0 / (1.0 - gamma0_plus)
    M = k * np.array([[gamma0_plus, gamma1], [1.0, gamma1]])
    return math.sqrt(2.0) * spectral_norm(M)


@dataclass
class StabilityVerdict:
    ssg_feasible: Optional[bool]
    ssg_cop_feasible: Optional[bool]
    witnesses: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    gamma0: Optional[float] = None
    gamma0_plus: Optional[float] = None
    gamma1: Optional[float] = None
    scaling: Optional[np.ndarray] = None
    certified_gain: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    @property
    def status(self):
        if self.ssg_cop_feasible is None:
            return "indeterminate"
        return "stable" if self.ssg_cop_feasible else "not-certified"

    @property
    def classification(self):
        if self.ssg_cop_feasible is None or self.ssg_feasible is None:
            return "indeterminate"
        if self.ssg_feasible:
            return "both"
        return "cop_only" if self.ssg_cop_feasible else "neither"


def _feasibility(rnn):
    ssg, w_ssg, msg_ssg = _feasible(rnn, False)
    cop, w_cop, msg_cop = _feasible(rnn, True)
    notes = []
    if ssg and not cop:
        # Q = 0 is admissible, so the SSG witness certifies SSG+COP as well
        m = rnn.m
        w_cop = dict(w_ssg, Q1=np.zeros((m, m)), Q2=np.zeros((m, m)))
        cop = True
        notes.append(f"SSG+COP solve did not confirm ({msg_cop}); using SSG witness with Q = 0")
    if ssg is None:
        notes.append(f"SSG undecided: {msg_ssg}")
    if cop is None:
        notes.append(f"SSG+COP undecided: {msg_cop}")
    witnesses = {}
    if w_ssg is not None:
        witnesses["ssg"] = w_ssg
    if w_cop is not None:
        witnesses["ssg_cop"] = w_cop
    return StabilityVerdict(ssg, cop, witnesses, notes=notes)


def certify(rnn, N=4, tol=DEFAULT_TOL, gains=True):
    """Run both small-gain tests and, when stable, bound the closed-loop gain.

    The gain is computed from an upper bound ``gamma0_plus`` on the positive
    norm of ``G0`` (order-`N` lifting) and ``gamma1 = ||G1||_2``.  If that
    bound is not below one, the diagonal scaling ``D = S^(-1/2)`` from the
    SSG+COP witness is applied to the loop first, and the gain of the scaled
    loop is mapped back through ``max(d) * max(1, 1/min(d))``.
    """
    verdict = _feasibility(rnn)
    if not gains or not verdict.ssg_cop_feasible:
        return verdict
    _, G0, G1 = subsystems(rnn)
    try:
        verdict.gamma0 = hinf_norm(G0, tol)
        verdict.gamma0_plus, _ = upper_bound_pos(G0, N, tol, hint=verdict.gamma0 * (1 + 2 * tol))
        verdict.gamma1 = hinf_norm(G1, tol)
        if verdict.gamma0_plus < 1.0:
            verdict.certified_gain = certified_gain_formula(verdict.gamma0_plus, verdict.gamma1)
            return verdict
        S = np.diag(verdict.witnesses["ssg_cop"]["S"])
        d = 1.0 / np.sqrt(S / S.max())
        scaled = RnnModel(rnn.Lambda, rnn.Win * d[None, :], rnn.Wout / d[:, None])
        _, G0s, G1s = subsystems(scaled)
        g0s, _ = upper_bound_pos(G0s, N, tol, hint=hinf_norm(G0s, tol) * (1 + 2 * tol))
        if g0s >= 1.0:
            verdict.notes.append(f"scaled positive-norm bound {g0s:.6g} not below 1")
            return verdict
        g1s = hinf_norm(G1s, tol)
        verdict.scaling = d
        kappa = d.max() * max(1.0, 1.0 / d.min())
        verdict.certified_gain = kappa * certified_gain_formula(g0s, g1s)
        verdict.notes.append(
            f"gain from scaled loop: gamma0+={g0s:.6g}, gamma1={g1s:.6g}, kappa={kappa:.6g}")
    except SolverFailure as exc:
        verdict.notes.append(f"gain computation failed: {exc}")
    return verdict


def gain_combination_lemma_check(a, b, c, d, trials=1000, rng=None):
    """Randomized check of the sqrt(2) gain-combination inequality.

    Draws vectors ``s, v`` and builds ``z, w`` whose norms respect
    ``|z| <= a|s| + b|v|`` and ``|w| <= c|s| + d|v|``, then checks
    ``|(z; w)| <= sqrt(2) ||[[a, b], [c, d]]||_2 |(s; v)|``.
    """
    rng = np.random.default_rng(rng)
    bound = math.sqrt(2.0) * spectral_norm(np.array([[a, b], [c, d]], dtype=float))
    for _ in range(trials):
        dims = rng.integers(1, 6, size=4)
        s, v = rng.standard_normal(dims[0]), rng.standard_normal(dims[1])
        if rng.random() < 0.2:
            (s if rng.random() < 0.5 else v)[:] = 0.0
        ns, nv = np.linalg.norm(s), np.linalg.norm(v)
        z = rng.standard_normal(dims[2])
        w = rng.standard_normal(dims[3])
        # scale to a random fraction of the admissible norm; fraction 1 half the time
        fz, fw = (1.0, 1.0) if rng.random() < 0.5 else rng.random(2)
        z *= fz * (a * ns + b * nv) / max(np.linalg.norm(z), 1e-300)
        w *= fw * (c * ns + d * nv) / max(np.linalg.norm(w), 1e-300)
        lhs = math.hypot(np.linalg.norm(z), np.linalg.norm(w))
        rhs = bound * math.hypot(ns, nv)
        if lhs > rhs * (1 + 1e-12) + 1e-300:
            return False
    return True


@dataclass(eq=False)
class RnnTemplate:
    """An RNN with two scalar parameters injected into ``Win``.

    ``a`` is added to ``Win[offset_at]`` and ``b`` replaces
    ``Win[replace_at]`` (zero-based indices).
    """

    Lambda: np.ndarray
    Win: np.ndarray
    Wout: np.ndarray
    offset_at: tuple = (0, 2)
    replace_at: tuple = (2, 1)

    def base_model(self):
        """The stored matrices as a model, with no parameter injected."""
        return RnnModel(self.Lambda, self.Win, self.Wout)

    def instantiate(self, a, b):
        Win = np.array(self.Win, dtype=float)
        Win[tuple(self.offset_at)] += a
        Win[tuple(self.replace_at)] = b
        return RnnModel(self.Lambda, Win, self.Wout)


PAPER_WIN = np.array([
    [0.29, -0.04, 0.02, -0.35, -0.05, -0.12],
    [-0.29, -0.24, -0.01, 0.12, -0.13, 0.18],
    [-0.50, 0.00, 0.23, 0.40, -0.28, -0.08],
    [0.14, -0.27, -0.15, 0.13, -0.47, -0.28],
    [-0.10, -0.10, 0.08, 0.14, -0.22, 0.50],
    [-0.11, -0.28, -0.21, -0.14, -0.09, 0.20],
])


def paper_template():
    """Six-neuron example: ``Lambda = 0``, ``Wout = I``, (a, b) sites in ``Win``."""
    return RnnTemplate(np.zeros((6, 6)), PAPER_WIN.copy(), np.eye(6))


@dataclass
class SweepCell:
    a: float
    b: float
    ssg: Optional[bool]
    ssg_cop: Optional[bool]
    classification: str


def region_sweep(template, a_values: Sequence[float], b_values: Sequence[float]):
    """Feasibility-only classification over a grid of (a, b).

    Cells are returned ordered by ``a`` then ``b``.
    """
    cells = []
    for a in a_values:
        for b in b_values:
            try:
                v = _feasibility(template.instantiate(float(a), float(b)))
                cells.append(SweepCell(float(a), float(b), v.ssg_feasible,
                                       v.ssg_cop_feasible, v.classification))
            except (SolverFailure, UnstableSystem, DimensionError) as exc:
                log.warning("cell (%g, %g) failed: %s", a, b, exc)
                cells.append(SweepCell(float(a), float(b), None, None, "indeterminate"))
    return cells
