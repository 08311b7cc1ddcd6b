import numpy as np
import pytest

from nilmetry.lie_core import make_builtin


@pytest.fixture(scope="session")
def heis():
    return make_builtin("heisenberg3")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def heisenberg_product(p, q):
    """(z1, t1) * (z2, t2) = (z1 + z2, t1 + t2 + 2 Im(z1 conj(z2))), written out by hand."""
    x1, y1, t1 = p[..., 0], p[..., 1], p[..., 2]
    x2, y2, t2 = q[..., 0], q[..., 1], q[..., 2]
    return np.stack([x1 + x2, y1 + y2, t1 + t2 + 2.0 * (y1 * x2 - x1 * y2)], axis=-1)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
