import numpy as np
import pytest

from convexflow import GridFunction, GridSpec


@pytest.fixture
def grid1():
    return GridSpec(1, 1.0, 0.05)


@pytest.fixture
def grid2():
    return GridSpec(2, 1.0, 0.05)


def sample(grid, f, t=0.0):
    return GridFunction.from_function(f, grid, t)


def quadratic(A, b=None, c=0.0):
    A = np.asarray(A, dtype=float)
    b = np.zeros(len(A)) if b is None else np.asarray(b, dtype=float)
    return lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x) + x @ b + c


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
