"""Conic programs over PSD / entrywise-nonnegative cones.

A `ConicProgram` holds scalar decision variables (grouped into named
symmetric, diagonal or scalar blocks), a linear objective, and constraints
of the form ``sign * (F0 + sum_i x_i F_i) - margin * I  in  cone``.  The
affine maps are recovered by probing a user callable, so constraints can be
written as ordinary numpy expressions of the variable blocks.

Composite cones are expanded into the two primitives before solving:

* ``DNN`` -> the same map tagged once ``PSD`` and once ``NN``;
* ``PSD_PLUS_NN`` -> one auxiliary symmetric block ``N`` with
  ``map - N in PSD`` and ``N in NN``.

``COP`` is rejected.  The primitive program is handed to Clarabel (an
interior-point solver) and every returned witness is replayed against the
membership tests in this module before being reported.
"""

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import clarabel
import numpy as np
from scipy import sparse

from .errors import DimensionError, SolverFailure, UnsupportedCone
from .numkernel import as_sym

__all__ = [
    "ConeKind",
    "Status",
    "Constraint",
    "ConicProgram",
    "SolveResult",
    "solve",
    "in_psd",
    "in_nn",
    "in_dnn",
    "in_psd_plus_nn",
    "is_copositive_2x2",
    "cop_bruteforce",
    "random_cp_matrix",
    "HORN_MATRIX",
]

SOLVER_TOL = 1e-7
INFEASIBILITY_THRESHOLD = 1e-7


class ConeKind(enum.Enum):
    PSD = "psd"
    NN = "nn"
    PSD_PLUS_NN = "psd+nn"
    DNN = "dnn"
    COP = "cop"


class Status(enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"

    @property
    def ok(self):
        return self in (Status.OPTIMAL, Status.FEASIBLE)


# --------------------------------------------------------------------------
# membership tests


def in_psd(S, tol=1e-9):
    S = as_sym(S)
    return bool(S.size == 0 or np.linalg.eigvalsh(S)[0] >= -tol)


def in_nn(S, tol=1e-9):
    S = as_sym(S)
    return bool(S.size == 0 or np.min(S) >= -tol)


def in_dnn(S, tol=1e-9):
    return in_psd(S, tol) and in_nn(S, tol)


def is_copositive_2x2(S):
    """Closed-form copositivity of a symmetric 2x2 matrix."""
    S = as_sym(S)
    if S.shape != (2, 2):
        raise DimensionError(f"expected a 2x2 matrix, got {S.shape}")
    a, b, c = S[0, 0], S[0, 1], S[1, 1]
    return bool(a >= 0 and c >= 0 and b + np.sqrt(a * c) >= 0)


def _simplex_grid(n, res):
    """All points of the simplex with coordinates k/res (compositions of res)."""
    for cuts in itertools.combinations(range(res + n - 1), n - 1):
        parts = np.diff(np.concatenate(([-1], cuts, [res + n - 1]))) - 1
        yield parts / res


def cop_bruteforce(S, grid_resolution=20, tol=1e-9):
    """One-sided copositivity oracle on a simplex grid.

    ``False`` is conclusive (a nonnegative point with negative quadratic
    form was found); ``True`` is only evidence.
    """
    S = as_sym(S)
    n = S.shape[0]
    if n > 6:
        raise DimensionError("cop_bruteforce supports dimension <= 6")
    X = np.array(list(_simplex_grid(n, grid_resolution)))
    vals = np.einsum("ki,ij,kj->k", X, S, X)
    return bool(np.min(vals) >= -tol)


def random_cp_matrix(n, rank=None, rng=None):
    """``B @ B.T`` with ``B`` entrywise nonnegative: completely positive, hence DNN."""
    rng = np.random.default_rng(rng)
    B = rng.random((n, rank or n))
    return B @ B.T


HORN_MATRIX = np.array([
    [1, -1, 1, 1, -1],
    [-1, 1, -1, 1, 1],
    [1, -1, 1, -1, 1],
    [1, 1, -1, 1, -1],
    [-1, 1, 1, -1, 1],
], dtype=float)


# --------------------------------------------------------------------------
# program model


@dataclass
class VarBlock:
    name: str
    kind: str  # "sym", "diag" or "scalar"
    dim: int
    offset: int

    @property
    def size(self):
        if self.kind == "sym":
            return self.dim * (self.dim + 1) // 2
        if self.kind == "diag":
            return self.dim
        return 1

    def value(self, x):
        seg = x[self.offset:self.offset + self.size]
        if self.kind == "scalar":
            return float(seg[0])
        if self.kind == "diag":
            return np.diag(seg)
        M = np.zeros((self.dim, self.dim))
        M[np.triu_indices(self.dim)] = seg
        return M + np.triu(M, 1).T


@dataclass
class Constraint:
    """``sign * (F0 + sum_i x_i F[i]) - margin * I`` must lie in `cone`."""

    F0: np.ndarray
    F: np.ndarray  # (nvar, d, d)
    cone: ConeKind
    negated: bool = False
    margin: float = 0.0
    name: str = ""

    @property
    def dim(self):
        return self.F0.shape[0]

    def value(self, x):
        """The signed, margin-free matrix the cone constraint applies to."""
        M = self.F0 + np.tensordot(x[:self.F.shape[0]], self.F, axes=1)
        M = 0.5 * (M + M.T)
        return -M if self.negated else M


@dataclass
class ConicProgram:
    blocks: List[VarBlock] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[str, object] = field(default_factory=dict)
    equalities: List[tuple] = field(default_factory=list)  # (row, rhs)

    @property
    def nvar(self):
        return sum(b.size for b in self.blocks)

    def _add_block(self, name, kind, dim):
        if any(b.name == name for b in self.blocks):
            raise ValueError(f"duplicate variable block {name!r}")
        if self.constraints:
            raise ValueError("declare all variables before adding constraints")
        blk = VarBlock(name, kind, dim, self.nvar)
        self.blocks.append(blk)
        return blk

    def sym_var(self, name, dim):
        return self._add_block(name, "sym", dim)

    def diag_var(self, name, dim):
        return self._add_block(name, "diag", dim)

    def scalar_var(self, name):
        return self._add_block(name, "scalar", 1)

    def unpack(self, x):
        return {b.name: b.value(x) for b in self.blocks}

    def _basis(self):
        """Per block, the values taken by each of its unit coordinate vectors."""
        out = []
        for b in self.blocks:
            e = np.zeros(b.offset + b.size)
            vals = []
            for i in range(b.size):
                e[b.offset + i] = 1.0
                vals.append(b.value(e))
                e[b.offset + i] = 0.0
            out.append(vals)
        return out

    def _probe(self, expr):
        nv = self.nvar
        zero = self.unpack(np.zeros(nv))
        F0 = as_sym(expr(zero))
        d = F0.shape[0]
        F = np.empty((nv, d, d))
        for b, vals in zip(self.blocks, self._basis()):
            probe = dict(zero)
            for i, val in enumerate(vals):
                probe[b.name] = val
                F[b.offset + i] = as_sym(expr(probe)) - F0
        return F0, F

    def add_constraint(self, expr: Callable[[dict], np.ndarray], cone, *,
                       negated=False, strict=False, margin=None, name=""):
        """Constrain the affine matrix ``expr(values)`` to a cone.

        `negated` asks for ``-expr`` in the cone (i.e. ``expr <= 0`` in the
        cone order).  `strict` applies the default margin
        ``1e-8 * (1 + ||F0||_2)``; an explicit `margin` overrides it.
        """
        cone = ConeKind(cone)
        F0, F = self._probe(expr)
        if margin is None:
            margin = 1e-8 * (1.0 + np.linalg.norm(F0, 2)) if strict else 0.0
        c = Constraint(F0, F, cone, negated, float(margin), name)
        self.constraints.append(c)
        return c

    def add_equality(self, expr: Callable[[dict], float], rhs):
        """Linear equality ``expr(values) == rhs`` (`expr` must be linear)."""
        F0, F = self._probe(lambda v: np.atleast_2d(expr(v)))
        base = float(F0[0, 0])
        self.equalities.append((F[:, 0, 0].copy(), float(rhs) - base))

    def minimize(self, coeffs):
        """Set a linear objective: mapping of block name to coefficient.

        Scalar blocks take a float; symmetric/diagonal blocks take a matrix
        ``C`` and contribute ``trace(C X)``.
        """
        self.objective = dict(coeffs)

    def cost_vector(self):
        c = np.zeros(self.nvar)
        for b in self.blocks:
            if b.name not in self.objective:
                continue
            coef = self.objective[b.name]
            if b.kind == "scalar":
                c[b.offset] = float(coef)
                continue
            C = as_sym(coef) if b.kind == "sym" else np.diag(np.diag(np.atleast_2d(coef)))
            e = np.zeros(self.nvar)
            for i in range(b.size):
                e[b.offset + i] = 1.0
                c[b.offset + i] = np.sum(C * b.value(e))
                e[b.offset + i] = 0.0
        return c

    def expand(self):
        """Equivalent program using only PSD and NN constraints."""
        for con in self.constraints:
            if con.cone is ConeKind.COP:
                raise UnsupportedCone(
                    "copositive constraints are not solvable directly; "
                    "use the PSD_PLUS_NN inner approximation")
        aux = [c for c in self.constraints if c.cone is ConeKind.PSD_PLUS_NN]
        out = ConicProgram(list(self.blocks), [], dict(self.objective))
        aux_blocks = {}
        for k, con in enumerate(aux):
            aux_blocks[id(con)] = out._add_block(f"_nn{k}", "sym", con.dim)
        nv = out.nvar
        out.equalities = [(np.concatenate([row, np.zeros(nv - len(row))]), rhs)
                          for row, rhs in self.equalities]
        for con in self.constraints:
            F = np.zeros((nv,) + con.F0.shape)
            F[:con.F.shape[0]] = con.F
            base = dict(F0=con.F0, negated=con.negated, margin=con.margin)
            if con.cone is ConeKind.PSD or con.cone is ConeKind.NN:
                out.constraints.append(Constraint(F=F, cone=con.cone, name=con.name, **base))
            elif con.cone is ConeKind.DNN:
                out.constraints.append(Constraint(F=F, cone=ConeKind.PSD, name=con.name, **base))
                out.constraints.append(Constraint(F=F.copy(), cone=ConeKind.NN,
                                                  name=con.name + ":nn", **base))
            else:
                blk = aux_blocks[id(con)]
                Fp = F.copy()
                Fn = np.zeros_like(F)
                sgn = -1.0 if con.negated else 1.0
                for i in range(blk.size):
                    e = np.zeros(nv)
                    e[blk.offset + i] = 1.0
                    Nm = blk.value(e)
                    # sign*(F0 + ...) - N in PSD, written in the stored (unsigned) frame
                    Fp[blk.offset + i] = -sgn * Nm
                    Fn[blk.offset + i] = Nm
                out.constraints.append(Constraint(F=Fp, cone=ConeKind.PSD,
                                                  name=con.name + ":psd", **base))
                out.constraints.append(Constraint(
                    np.zeros_like(con.F0), Fn, ConeKind.NN, False, 0.0, con.name + ":nn"))
        return out


@dataclass
class SolveResult:
    status: Status
    objective: float = float("nan")
    x: Optional[np.ndarray] = None
    values: Dict[str, object] = field(default_factory=dict)
    witnesses: List[np.ndarray] = field(default_factory=list)
    max_violation: float = float("nan")
    duality_gap: float = float("nan")
    infeasibility: float = float("nan")
    message: str = ""

    @property
    def ok(self):
        return self.status.ok


# --------------------------------------------------------------------------
# Clarabel translation


def _svec_index(d):
    """Row/col index pairs of Clarabel's triangle ordering (upper, by columns)."""
    rows, cols = [], []
    for j in range(d):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def _cone_rows(con, with_shift):
    """(b, A, shift_column, clarabel cone) for one primitive constraint.

    Clarabel form: ``A x + s = b``, ``s in K``.  Here ``s`` is the vectorized
    ``sign*(F0 + sum x_i F_i) - margin*E (+ t*E in phase one)``.
    """
    d = con.dim
    sgn = -1.0 if con.negated else 1.0
    r, c = _svec_index(d)
    if con.cone is ConeKind.PSD:
        scale = np.where(r == c, 1.0, np.sqrt(2.0))
        E = np.eye(d)
        cone = clarabel.PSDTriangleConeT(d)
    else:
        scale = np.ones(len(r))
        E = np.ones((d, d))
        cone = clarabel.NonnegativeConeT(len(r))
    b = scale * (sgn * con.F0[r, c] - con.margin * E[r, c])
    A = -scale[None, :] * sgn * con.F[:, r, c]  # (nvar, rows)
    tcol = -scale * E[r, c] if with_shift else None
    if con.cone is ConeKind.PSD and d == 1:
        cone = clarabel.NonnegativeConeT(1)
    return b, A.T, tcol, cone


def _assemble(prog, phase_one):
    bs, As, cones = [], [], []
    nv = prog.nvar
    if prog.equalities:
        E = np.array([row for row, _ in prog.equalities])
        if phase_one:
            E = np.hstack([E, np.zeros((len(E), 1))])
        As.append(E)
        bs.append(np.array([rhs for _, rhs in prog.equalities]))
        cones.append(clarabel.ZeroConeT(len(E)))
    for con in prog.constraints:
        b, A, tcol, cone = _cone_rows(con, phase_one)
        if phase_one:
            A = np.hstack([A, tcol[:, None]])
        bs.append(b)
        As.append(A)
        cones.append(cone)
    if phase_one:
        # t >= -1 keeps the margin problem bounded
        row = np.zeros((1, nv + 1))
        row[0, -1] = -1.0
        As.append(row)
        bs.append(np.array([1.0]))
        cones.append(clarabel.NonnegativeConeT(1))
    A = sparse.csc_matrix(np.vstack(As)) if As else sparse.csc_matrix((0, nv))
    return A, np.concatenate(bs) if bs else np.zeros(0), cones


def _settings(max_iter):
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_iter = max_iter
    s.tol_gap_abs = 1e-9
    s.tol_gap_rel = 1e-9
    s.tol_feas = 1e-9
    return s


def _run(P, q, A, b, cones, max_iter):
    solver = clarabel.DefaultSolver(P, q, A, b, cones, _settings(max_iter))
    return solver.solve()


def _status_name(sol):
    return str(sol.status).split(".")[-1]


def _violation(prog, x):
    worst = 0.0
    for row, rhs in prog.equalities:
        worst = max(worst, abs(float(row @ x[:len(row)]) - rhs))
    for con in prog.constraints:
        V = con.value(x)
        if con.cone is ConeKind.PSD:
            m = np.linalg.eigvalsh(V - con.margin * np.eye(con.dim))[0]
        else:
            m = np.min(V) - con.margin
        worst = max(worst, -m)
    return float(worst)


def _finish(prog, expanded, x, status, objective, **kw):
    values = prog.unpack(x[:prog.nvar])
    witnesses = [con.value(x) for con in expanded.constraints]
    return SolveResult(status, objective, x, values, witnesses,
                       max_violation=_violation(expanded, x), **kw)


def phase_one(prog, max_iter=200):
    """Minimal uniform shift ``t`` making every constraint hold.

    Returns ``(t, x)``; ``t <= 0`` means feasible (with margin ``-t``),
    ``t > 0`` measures infeasibility.  `prog` must be expanded.
    """
    nv = prog.nvar
    A, b, cones = _assemble(prog, True)
    q = np.zeros(nv + 1)
    q[-1] = 1.0
    sol = _run(sparse.csc_matrix((nv + 1, nv + 1)), q, A, b, cones, max_iter)
    name = _status_name(sol)
    x = np.asarray(sol.x)
    if name not in ("Solved", "AlmostSolved") or not np.all(np.isfinite(x)):
        return float("nan"), None, name
    return float(x[-1]), x[:nv], name


def solve(prog, max_iter=200, feas_tol=SOLVER_TOL):
    """Solve a conic program.

    Programs with no objective are feasibility problems and go straight to
    the phase-one margin problem.  Otherwise the program is solved directly
    and, if the solver does not return a solution, phase one decides
    between ``INFEASIBLE`` (margin measure above 1e-7) and a failure status.
    """
    expanded = prog.expand()
    nv = expanded.nvar
    c = expanded.cost_vector()

    def feasibility_verdict(extra=""):
        t, x, name = phase_one(expanded, max_iter)
        if x is None:
            st = Status.MAX_ITERATIONS if name == "MaxIterations" else Status.NUMERICAL_FAILURE
            return SolveResult(st, message=f"phase one: {name}{extra}")
        if t > INFEASIBILITY_THRESHOLD:
            return SolveResult(Status.INFEASIBLE, infeasibility=t, x=x,
                               message=f"infeasibility measure {t:.3g}{extra}")
        res = _finish(prog, expanded, x, Status.FEASIBLE, float(c @ x),
                      infeasibility=t, message=extra.strip())
        if res.max_violation > feas_tol:
            res.status = Status.NUMERICAL_FAILURE
            res.message = f"phase-one witness violates constraints by {res.max_violation:.3g}"
        return res

    if not np.any(c):
        return feasibility_verdict()

    A, b, cones = _assemble(expanded, False)
    sol = _run(sparse.csc_matrix((nv, nv)), c, A, b, cones, max_iter)
    name = _status_name(sol)
    x = np.asarray(sol.x)
    if name in ("Solved", "AlmostSolved") and np.all(np.isfinite(x)):
        gap = abs(float(sol.obj_val) - float(getattr(sol, "obj_val_dual", sol.obj_val)))
        res = _finish(prog, expanded, x, Status.OPTIMAL, float(c @ x), duality_gap=gap,
                      message=name)
        if res.max_violation <= feas_tol:
            return res
        res.status = Status.NUMERICAL_FAILURE
        res.message = f"witness violates constraints by {res.max_violation:.3g}"
        return res
    return feasibility_verdict(f" (direct solve: {name})")


def require(result, what):
    """Raise `SolverFailure` unless `result` is decided (ok or infeasible)."""
    if result.status in (Status.MAX_ITERATIONS, Status.NUMERICAL_FAILURE):
        raise SolverFailure(f"{what}: {result.status.value} ({result.message})", result)
    return result


# --------------------------------------------------------------------------
# PSD + NN membership


@dataclass
class SplitWitness:
    member: bool
    psd_part: Optional[np.ndarray]
    nn_part: Optional[np.ndarray]
    infeasibility: float


def in_psd_plus_nn(S, tol=1e-7):
    """Decide ``S in PSD + NN`` by a feasibility SDP and return the split.

    Membership is reported when the phase-one shift is at most `tol`; the
    witness then satisfies ``S = psd_part + nn_part`` exactly with both parts
    in their cones up to that shift.
    """
    S = as_sym(S)
    d = S.shape[0]
    if in_psd(S, 0.0):
        return SplitWitness(True, S.copy(), np.zeros_like(S), 0.0)
    if in_nn(S, 0.0):
        return SplitWitness(True, np.zeros_like(S), S.copy(), 0.0)
    prog = ConicProgram()
    prog.sym_var("N", d)
    prog.add_constraint(lambda v: S - v["N"], ConeKind.PSD, name="psd")
    prog.add_constraint(lambda v: v["N"], ConeKind.NN, name="nn")
    t, x, name = phase_one(prog)
    if x is None:
        raise SolverFailure(f"PSD+NN membership solve failed: {name}")
    N = prog.unpack(x)["N"]
    if t > tol:
        return SplitWitness(False, None, None, t)
    return SplitWitness(True, S - N, N, t)
