import numpy as np
import pytest

from posgain.cones import (HORN_MATRIX, ConeKind, ConicProgram, Status, cop_bruteforce, in_dnn,
                           in_nn, in_psd, in_psd_plus_nn, is_copositive_2x2, random_cp_matrix,
                           solve)
from posgain.errors import DimensionError, UnsupportedCone
from posgain.posnorm import _dnn_relaxation


def test_in_psd_examples():
    assert in_psd(np.eye(3))
    assert not in_psd([[1, 2], [2, 1]])
    B = np.random.default_rng(0).standard_normal((4, 2))
    assert in_psd(B @ B.T)


def test_in_nn_examples():
    assert in_nn(np.ones((3, 3)))
    assert not in_nn([[1, -0.1], [-0.1, 1]])
    assert not in_nn(np.eye(2) - 0.01 * (np.ones((2, 2)) - np.eye(2)))
    assert in_nn(np.eye(2) + 0.01 * (np.ones((2, 2)) - np.eye(2)))


def test_psd_plus_nn_trivial_members():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((4, 4))
    w = in_psd_plus_nn(B @ B.T)
    assert w.member and not w.nn_part.any()
    N = rng.random((4, 4))
    w = in_psd_plus_nn(N + N.T)
    assert w.member and not w.psd_part.any()


def test_psd_plus_nn_split_witness():
    S = np.array([[1.0, -1.2, 0.5], [-1.2, 2.0, 0.7], [0.5, 0.7, 0.1]])
    w = in_psd_plus_nn(S)
    assert w.member
    np.testing.assert_allclose(w.psd_part + w.nn_part, S, atol=1e-12)
    assert in_psd(w.psd_part, 1e-7) and in_nn(w.nn_part, 1e-7)


def test_horn_matrix_is_copositive_but_not_psd_plus_nn():
    assert cop_bruteforce(HORN_MATRIX, 16)
    w = in_psd_plus_nn(HORN_MATRIX)
    assert not w.member
    assert w.infeasibility > 1e-7


def test_copositive_2x2_closed_form():
    assert is_copositive_2x2([[1, -1], [-1, 1]])
    assert not is_copositive_2x2([[1, -2], [-2, 1]])
    assert is_copositive_2x2([[0, 1], [1, 0]])
    with pytest.raises(DimensionError):
        is_copositive_2x2(np.eye(3))


def test_cop_bruteforce_examples():
    assert cop_bruteforce(np.random.default_rng(0).random((4, 4)))
    assert not cop_bruteforce([[1, -2], [-2, 1]], 2)


def _random_sym2(rng):
    S = rng.standard_normal((2, 2))
    return S + S.T


def test_cop_bruteforce_agrees_with_closed_form():
    rng = np.random.default_rng(2)
    for _ in range(500):
        S = _random_sym2(rng)
        assert cop_bruteforce(S, 200) == is_copositive_2x2(S) or \
            (is_copositive_2x2(S) is False and cop_bruteforce(S, 200))


def test_psd_plus_nn_agrees_with_closed_form_2x2():
    rng = np.random.default_rng(3)
    for _ in range(500):
        S = _random_sym2(rng)
        assert in_psd_plus_nn(S).member == is_copositive_2x2(S)


def test_inclusion_chain():
    rng = np.random.default_rng(4)
    for n in (2, 3, 4):
        for _ in range(10):
            X = random_cp_matrix(n, rng=rng)
            assert in_psd(X) and in_nn(X) and in_dnn(X)
            B = rng.standard_normal((n, n))
            P = B @ B.T
            N = rng.random((n, n))
            N = N + N.T
            for S in (P, N, P + N - 0.1 * np.eye(n)):
                split = in_psd_plus_nn(S)
                if split.member:
                    assert cop_bruteforce(S, 12, tol=1e-7)
            assert in_psd_plus_nn(P).member and in_psd_plus_nn(N).member
            # falsified copositivity must never be certified as PSD + NN
            S = rng.standard_normal((n, n))
            S = S + S.T
            if not cop_bruteforce(S, 12):
                assert not in_psd_plus_nn(S).member


def test_solve_max_eigenvalue():
    p = ConicProgram()
    p.scalar_var("t")
    p.add_constraint(lambda v: v["t"] * np.eye(2) - np.diag([2.0, 3.0]), ConeKind.PSD)
    p.minimize({"t": 1.0})
    res = solve(p)
    assert res.status is Status.OPTIMAL
    assert res.objective == pytest.approx(3.0, abs=1e-7)


def test_solve_nonnegative_scalar():
    p = ConicProgram()
    p.scalar_var("t")
    p.add_constraint(lambda v: np.array([[v["t"]]]), ConeKind.NN)
    p.minimize({"t": 1.0})
    assert solve(p).objective == pytest.approx(0.0, abs=1e-7)


def test_solve_rejects_cop():
    p = ConicProgram()
    p.scalar_var("t")
    p.add_constraint(lambda v: v["t"] * np.eye(2), ConeKind.COP)
    p.minimize({"t": 1.0})
    with pytest.raises(UnsupportedCone):
        solve(p)


def test_solve_reports_infeasible():
    p = ConicProgram()
    p.scalar_var("t")
    p.add_constraint(lambda v: np.array([[v["t"] - 1.0]]), ConeKind.NN)
    p.add_constraint(lambda v: np.array([[-v["t"]]]), ConeKind.NN)
    p.minimize({"t": 1.0})
    res = solve(p)
    assert res.status is Status.INFEASIBLE
    assert res.infeasibility > 1e-7


def test_solve_strict_margin():
    p = ConicProgram()
    p.scalar_var("t")
    c = p.add_constraint(lambda v: v["t"] * np.eye(2) - np.eye(2), ConeKind.PSD, strict=True)
    assert c.margin == pytest.approx(1e-8 * 2)
    p.minimize({"t": 1.0})
    assert solve(p).objective == pytest.approx(1.0 + 2e-8, abs=1e-8)


def test_dnn_relaxation_matches_grid_oracle():
    D = np.array([[1.0, -0.8], [0.3, 0.9]])
    res = solve(_dnn_relaxation(D.T @ D))
    theta = np.linspace(0, np.pi / 2, 200_001)
    V = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    grid = np.max(np.sum((V @ D.T) ** 2, axis=1))
    assert -res.objective == pytest.approx(grid, abs=1e-4)


def _random_program(rng, k_lmis=3):
    p = ConicProgram()
    for i in range(3):
        p.scalar_var(f"x{i}")
    Fs = []
    for _ in range(k_lmis):
        G = rng.standard_normal((3, 3))
        F0 = G @ G.T + np.eye(3)
        Fi = [(lambda M: M + M.T)(rng.standard_normal((3, 3))) for _ in range(3)]
        Fs.append((F0, Fi))
    for F0, Fi in Fs:
        p.add_constraint(lambda v, F0=F0, Fi=Fi: F0 + sum(v[f"x{i}"] * Fi[i] for i in range(3)),
                         ConeKind.PSD)
    for i in range(3):
        p.add_constraint(lambda v, i=i: np.diag([v[f"x{i}"] + 10.0, 10.0 - v[f"x{i}"]]),
                         ConeKind.PSD)
    p.minimize({f"x{i}": c for i, c in enumerate(rng.standard_normal(3))})
    return p


def _replay(prog, res):
    expanded = prog.expand()
    for con, W in zip(expanded.constraints, res.witnesses):
        if con.cone is ConeKind.PSD:
            assert in_psd(W - con.margin * np.eye(con.dim), 1e-7)
        else:
            assert in_nn(W, 1e-7)


def test_solve_monotone_under_relaxation_and_replay():
    rng = np.random.default_rng(8)
    for _ in range(20):
        p = _random_program(rng)
        full = solve(p)
        assert full.status is Status.OPTIMAL
        _replay(p, full)
        relaxed = ConicProgram(p.blocks, p.constraints[1:], p.objective)
        r = solve(relaxed)
        assert r.status is Status.OPTIMAL
        _replay(relaxed, r)
        assert r.objective <= full.objective + 1e-7


def test_composite_expansion():
    p = ConicProgram()
    p.scalar_var("g")
    p.add_constraint(lambda v: v["g"] * np.eye(2) - np.array([[1.0, -1.0], [-1.0, 1.0]]),
                     ConeKind.PSD_PLUS_NN)
    p.minimize({"g": 1.0})
    e = p.expand()
    assert [c.cone for c in e.constraints] == [ConeKind.PSD, ConeKind.NN]
    assert e.nvar == 1 + 3
    assert solve(p).objective == pytest.approx(1.0, abs=1e-6)
