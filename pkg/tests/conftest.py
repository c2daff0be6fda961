import numpy as np
import pytest

from hpsmg.dissection import build_hierarchy
from hpsmg.problems import bump_problem, discretize, planewave_problem, wavenumber_from_ppw

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def bump_4x8():
    """Gaussian bump on a 4x4 mesh of degree-8 elements, kappa from 9.6 ppw."""
    return discretize(bump_problem(wavenumber_from_ppw(9.6, 4, 8)), 4, 8)


@pytest.fixture(scope="session")
def bump_4x8_hierarchy(bump_4x8):
    return build_hierarchy(bump_4x8)


@pytest.fixture(scope="session")
def bump_8x8():
    return discretize(bump_problem(wavenumber_from_ppw(9.6, 8, 8)), 8, 8)


@pytest.fixture(scope="session")
def planewave_4x8():
    return discretize(planewave_problem(10.0), 4, 8)
