import numpy as np
import pytest

from piezo_lab import BeamParameters, assemble, build_mesh, generator


@pytest.fixture
def p0():
    return BeamParameters()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_system(n=20, **changes):
    p = BeamParameters(**changes)
    return assemble(build_mesh(n, p.L), p)


def make_generator(n=20, **changes):
    return generator(make_system(n, **changes))


# acceptance lines collected by tests/test_acceptance.py, printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
