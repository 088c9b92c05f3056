import pytest

from dwgate.potential import LatticeParams
from dwgate.units import PhysicalParams, make_unit_system

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def lattice():
    return LatticeParams()


@pytest.fixture(scope="session")
def units():
    return make_unit_system(PhysicalParams())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
