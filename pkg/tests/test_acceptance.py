"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (also echoed in the
terminal summary) and then asserts the same condition.
"""

import math
import time
from importlib import resources

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_stable
from posgain.cli import main
from posgain.cones import (cop_bruteforce, in_dnn, in_psd_plus_nn, is_copositive_2x2,
                           random_cp_matrix)
from posgain.files import load_expected
from posgain.lti import lifting_identities_check
from posgain.posnorm import (hinf_norm, lower_bound_pos, theorem2_composition_check,
                             upper_bound_pos, verify_certificate)
from posgain.rnn import (_replay, certify, gain_combination_lemma_check, region_sweep, relu,
                         simulate_rnn, subsystems)

TOL = 1e-4


def report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def expected():
    return load_expected("lti_example")


@pytest.fixture(scope="module")
def rnn_expected():
    return load_expected("rnn_example")


def test_criterion_1_hinf_baseline(capsys, expected):
    path = str(resources.files("posgain.data") / "lti_example.json")
    t0 = time.perf_counter()
    code = main(["norm", path])
    elapsed = time.perf_counter() - t0
    value = float(capsys.readouterr().out)
    ok = code == 0 and abs(value - expected["hinf"]) <= 5e-3 and elapsed < 5
    report(1, ok, f"hinf={value:.6f} (expected {expected['hinf']} +-0.005), {elapsed:.2f}s")


def test_criterion_2_upper_bound(paper_sys, paper_sweep, expected):
    single, cert = upper_bound_pos(paper_sys, 19)
    swept = paper_sweep.row(19).upper
    ok = (abs(single - expected["upper_N19"]) <= 1e-2 and abs(swept - expected["upper_N19"]) <= 1e-2
          and verify_certificate(paper_sys, cert).ok and paper_sweep.elapsed < 600)
    report(2, ok, f"upper_19={single:.6f} (sweep {swept:.6f}, expected "
                  f"{expected['upper_N19']} +-0.01), sweep {paper_sweep.elapsed:.1f}s")


def test_criterion_3_lower_bound(paper_sys, paper_sweep, expected):
    value, wit = lower_bound_pos(paper_sys, 20)
    best_upper = paper_sweep.best_upper
    sandwich = all(r.lower <= best_upper + 2 * TOL * (1 + best_upper) for r in paper_sweep.rows)
    ok = abs(value - expected["lower_N20"]) <= 1e-2 and sandwich and not paper_sweep.warnings
    report(3, ok, f"lower_20={value:.6f} (expected {expected['lower_N20']} +-0.01, "
                  f"rank-one {wit.rank_one_exact}), lower_N <= best upper for all N: {sandwich}")


def test_criterion_4_divisibility(paper_sys, paper_sweep):
    bad = []
    for N in range(1, 7):
        for p in (2, 3):
            if p * N <= 20:
                big, small = paper_sweep.row(p * N).upper, paper_sweep.row(N).upper
                if big > small + 2 * TOL * (1 + small):
                    bad.append((N, p * N))
    composed = theorem2_composition_check(paper_sys, 2, 2, paper_sweep.certificates[2])
    report(4, not bad and composed.ok,
           f"violating pairs: {bad or 'none'}; composition N=2,p=2: {composed.ok}")


def test_criterion_5_single_input(paper_sys, paper_sweep):
    systems = [paper_sys] + [random_stable(np.random.default_rng(100 + i), 3, 1, 2)
                             for i in range(10)]
    gaps = []
    for s in systems:
        h = hinf_norm(s, TOL)
        u, _ = upper_bound_pos(s, 1, TOL)
        gaps.append(abs(u - h) / (1 + h))
    worst = max(gaps)
    report(5, worst <= 2 * TOL, f"max |upper_1 - hinf|/(1+hinf) = {worst:.2e} over "
                                f"{len(systems)} systems (limit {2 * TOL:g})")


def test_criterion_6_externally_positive():
    worst_up, worst_low = 0.0, 0.0
    for i in range(10):
        rng = np.random.default_rng(200 + i)
        s = random_stable(rng, 3, 2, 2, radius=rng.uniform(0.3, 0.85), nonneg=True)
        h = hinf_norm(s, TOL)
        u, _ = upper_bound_pos(s, 8, TOL)
        low, _ = lower_bound_pos(s, 8, TOL)
        worst_up = max(worst_up, abs(u - h) / h)
        worst_low = max(worst_low, low / h - 1.0)
    ok = worst_up <= 1e-2 and worst_low <= 1e-2
    report(6, ok, f"max |upper_8 - hinf|/hinf = {worst_up:.2e}, "
                  f"max (lower_8/hinf - 1) = {worst_low:.2e} (limit 1e-2)")


def test_criterion_7_rnn_baseline(paper_template, rnn_expected):
    rnn = paper_template.instantiate(0.0, 0.0)
    g0 = hinf_norm(subsystems(rnn)[1], TOL)
    verdict = certify(rnn, gains=False)
    ok = abs(g0 - rnn_expected["hinf_G0_at_origin"]) <= 2e-3 and \
        verdict.classification == rnn_expected["origin_classification"]
    report(7, ok, f"hinf(G0)={g0:.6f} (expected {rnn_expected['hinf_G0_at_origin']} +-0.002), "
                  f"classification {verdict.classification}")


def test_criterion_8_region(paper_template, rnn_expected):
    grid = np.linspace(-8, 8, 17)
    t0 = time.perf_counter()
    cells = region_sweep(paper_template, grid, grid)
    elapsed = time.perf_counter() - t0
    counts = {}
    for c in cells:
        counts[c.classification] = counts.get(c.classification, 0) + 1
    subset = all(c.ssg_cop for c in cells if c.ssg)
    cop_only = counts.get("cop_only", 0) > 0
    ok = subset and cop_only == rnn_expected["cop_only_nonempty"] and elapsed < 1200
    report(8, ok, f"SSG subset of SSG+COP: {subset}; counts {dict(sorted(counts.items()))}; "
                  f"{elapsed:.1f}s")


def _property_suite(paper_sys, paper_sweep, paper_template):
    rng = np.random.default_rng(9)
    failures = []
    # cone inclusion chain
    for n in (2, 3, 4, 5):
        for _ in range(10):
            X = random_cp_matrix(n, rng=rng)
            S = rng.standard_normal((n, n))
            S = S + S.T
            if not (in_dnn(X) and in_psd_plus_nn(X).member):
                failures.append("CP matrix outside DNN or PSD+NN")
            if in_psd_plus_nn(S).member and not cop_bruteforce(S, 10, tol=1e-7):
                failures.append("PSD+NN member failed copositivity sampling")
    # 2x2 copositivity: closed form vs PSD+NN
    mism = 0
    for _ in range(500):
        S = rng.standard_normal((2, 2))
        S = S + S.T
        mism += in_psd_plus_nn(S).member != is_copositive_2x2(S)
    if mism:
        failures.append(f"{mism} 2x2 disagreements")
    # lifting block identities
    for i in range(20):
        s = random_stable(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)),
                          int(rng.integers(1, 3)))
        for N1 in (1, 2, 3):
            for N2 in (1, 4):
                if not lifting_identities_check(s, N1, N2, 1e-10):
                    failures.append(f"lifting identity system {i} ({N1},{N2})")
    # gain combination lemma
    for _ in range(5):
        if not gain_combination_lemma_check(*rng.random(4) * 4, trials=200, rng=rng):
            failures.append("gain lemma")
    # ReLU 1-Lipschitz
    X, Y = rng.standard_normal((2, 10000, 6)) * 10
    if np.any(np.linalg.norm(relu(X) - relu(Y), axis=1) > np.linalg.norm(X - Y, axis=1) + 1e-12):
        failures.append("relu Lipschitz")
    # certificate replay for every solver output
    for N, cert in paper_sweep.certificates.items():
        if not verify_certificate(paper_sys, cert):
            failures.append(f"certificate replay N={N}")
    for N, wit in paper_sweep.lower_witnesses.items():
        if not (in_dnn(wit.Z_star, 1e-7) and abs(np.trace(wit.Z_star) - 1) <= 1e-7
                and wit.v_star.min() >= 0 and abs(np.linalg.norm(wit.v_star) - 1) <= 1e-9):
            failures.append(f"lower witness N={N}")
    rnn = paper_template.instantiate(0.0, 0.0)
    verdict = certify(rnn)
    for test, values in verdict.witnesses.items():
        if not _replay(rnn, values):
            failures.append(f"rnn witness {test}")
    # Monte-Carlo gains
    worst = 0.0
    for seed in range(50):
        r = np.random.default_rng(seed)
        K = int(r.integers(10, 301))
        s, v = r.standard_normal((K, 6)), r.standard_normal((K, 6))
        _, z, w = simulate_rnn(rnn, s, v)
        worst = max(worst, math.hypot(np.linalg.norm(z), np.linalg.norm(w))
                    / math.hypot(np.linalg.norm(s), np.linalg.norm(v)))
    if not worst <= verdict.certified_gain:
        failures.append(f"empirical gain {worst:.3g} > certified {verdict.certified_gain:.3g}")
    return failures, worst, verdict.certified_gain


def test_criterion_9_property_suite(paper_sys, paper_sweep, paper_template):
    t0 = time.perf_counter()
    failures, worst, certified = _property_suite(paper_sys, paper_sweep, paper_template)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 300
    report(9, ok, f"failures: {failures or 'none'}; empirical gain {worst:.3f} <= certified "
                  f"{certified:.3f}; {elapsed:.1f}s")
