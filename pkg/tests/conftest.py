import numpy as np
import pytest

from hsdecomp.space import build_space


@pytest.fixture(scope="session")
def p4():
    return build_space("path(4,1.0)")


@pytest.fixture(scope="session")
def cycle8():
    return build_space("cycle(8)")


@pytest.fixture(scope="session")
def grid4():
    return build_space("grid(4x4)")


@pytest.fixture(scope="session")
def cloud32():
    return build_space("cloud(32,seed=3)")


@pytest.fixture
def ramp():
    return np.array([0.0, 1.0, 2.0, 3.0])


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
