import time

import numpy as np
import pytest

from fraclab.model import Ball, make_log_grid, make_params
from fraclab.variational import SolverConfig, minimize_K, minimize_S_ball

# acceptance outcomes, printed in the terminal summary
ACCEPTANCE = {}


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def supercritical():
    params = make_params(3, 0.5, 3.0, 6.0)
    t0 = time.perf_counter()
    res = minimize_K(params, SolverConfig(), make_log_grid(1e-2, 100.0, 1024, 3))
    return params, res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def supercritical_coarse():
    # one refinement level below: half the nodes, twice the first step
    params = make_params(3, 0.5, 3.0, 6.0)
    return params, minimize_K(params, SolverConfig(), make_log_grid(2e-2, 100.0, 512, 3))


@pytest.fixture(scope="session")
def critical():
    params = make_params(3, 0.5, 2.0, 6.0)
    return params, minimize_K(params, SolverConfig(), make_log_grid(1e-2, 100.0, 1024, 3))


@pytest.fixture(scope="session")
def ball():
    params = make_params(3, 0.5, 2.0, 6.0, Ball(1.0))
    return params, minimize_S_ball(params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
