import numpy as np
import pytest

from veclorenz.closed_forms import TWO_POINT_ATOMS
from veclorenz.ot_solver import solve


@pytest.fixture(scope="session")
def two_point_fits():
    w = np.array([0.5, 0.5])
    return {kind: solve(atoms, w) for kind, atoms in TWO_POINT_ATOMS.items()}


@pytest.fixture(scope="session")
def lognormal_fit():
    rng = np.random.default_rng(11)
    x = rng.lognormal(0.0, 0.8, size=(150, 2))
    x /= x.mean(axis=0)
    return solve(x, np.full(len(x), 1.0 / len(x)))


@pytest.fixture(scope="session")
def weighted_fit():
    rng = np.random.default_rng(12)
    x = rng.gamma(2.0, size=(40, 2))
    w = rng.uniform(0.5, 2.0, size=40)
    w /= w.sum()
    x /= w @ x
    return solve(x, w)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
