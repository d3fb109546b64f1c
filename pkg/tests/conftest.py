import time

import numpy as np
import pytest

from posgain.files import load_example
from posgain.lti import StateSpace
from posgain.posnorm import bound_sweep


def random_stable(rng, n=3, nw=1, nz=1, radius=0.8, nonneg=False):
    A = rng.random((n, n)) if nonneg else rng.standard_normal((n, n))
    A *= radius / max(abs(np.linalg.eigvals(A)))
    draw = rng.random if nonneg else rng.standard_normal
    return StateSpace(A, draw((n, nw)), draw((nz, n)), 0.5 * draw((nz, nw)))


@pytest.fixture(scope="session")
def paper_sys():
    return load_example("lti_example")


@pytest.fixture(scope="session")
def paper_template():
    return load_example("rnn_example")


@pytest.fixture(scope="session")
def paper_sweep(paper_sys):
    """Bounds for N = 1..20 on the bundled example (about 30 s).

    The wall time of the sweep is stored on the report as ``elapsed``.
    """
    t0 = time.perf_counter()
    report = bound_sweep(paper_sys, 20)
    report.elapsed = time.perf_counter() - t0
    return report


# acceptance lines collected by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
