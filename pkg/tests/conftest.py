import numpy as np
import pytest

from superhex.capacitance import periodic_capacitance
from superhex.lattice import build_inclusions, build_lattice
from superhex.mesh import discretize

RADIUS = 0.086

# filled by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def basis():
    return build_lattice()


@pytest.fixture(scope="session")
def layout0():
    return build_inclusions(RADIUS, 0.0)


@pytest.fixture(scope="session")
def mesh32(layout0):
    return discretize(layout0, 32)


@pytest.fixture(scope="session")
def cap32(mesh32):
    return periodic_capacitance(mesh32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
