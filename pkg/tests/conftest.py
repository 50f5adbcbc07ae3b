import numpy as np
import pytest

from expsymp.phase import State
from expsymp.problems import integrable1d, integrable1d_exact


@pytest.fixture(scope="session")
def H1():
    return integrable1d()


@pytest.fixture(scope="session")
def s0():
    return State([0.0], [-3.0])


@pytest.fixture(scope="session")
def exact_ref(s0):
    def ref(t):
        p, q = integrable1d_exact(s0, t)
        return p[:, None], q[:, None]

    return ref


@pytest.fixture(scope="session")
def orbit_points(s0):
    """20 random points on the energy-5 orbit of problem 1."""
    rng = np.random.default_rng(7)
    t = rng.uniform(0.0, 10.0, 20)
    P, Q = integrable1d_exact(s0, t)
    return [State([p], [q]) for p, q in zip(P, Q)]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
