import numpy as np
import pytest

from dyadica.grid import GridSpec
from dyadica.measure import cascade, uniform


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def uniform6():
    return uniform(GridSpec(1, 6))


@pytest.fixture(scope="session")
def cascade6():
    return cascade(GridSpec(1, 6), 0.25, seed=3)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
