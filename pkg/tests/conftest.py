import numpy as np
import pytest

from pulledfront import front, model, operator

DESK_L = 200.0
DESK_N = 8192


class Setup:
    """Model, speed, front, operator and psi on one grid."""

    def __init__(self, mdl, L, n):
        self.model = mdl
        self.ss = model.find_spreading_speed(mdl)
        self.front = front.solve_front(mdl, self.ss, L=L, n=n)
        self.op = operator.build_operator(mdl, self.ss, self.front)
        self.psi = front.compute_psi(self.front, mdl, self.ss)

    @property
    def x(self):
        return self.op.x

    def gaussian(self, center=5.0, width=1.0):
        return np.exp(-((self.x - center) / width) ** 2)


@pytest.fixture(scope="session")
def fkpp():
    return Setup(model.fisher_kpp(), DESK_L, DESK_N)


@pytest.fixture(scope="session")
def efkpp():
    return Setup(model.extended_fkpp(0.1), DESK_L, DESK_N)


@pytest.fixture(scope="session")
def fkpp_small():
    """Coarse FKPP instance for fast structural tests."""
    return Setup(model.fisher_kpp(), 60.0, 1201)


@pytest.fixture(scope="session")
def efkpp_small():
    return Setup(model.extended_fkpp(0.1), 60.0, 1201)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
