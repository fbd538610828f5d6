import numpy as np
import pytest

from agvsched import _backend
from agvsched.link_adaptation import default_catalogue

_ACCEPTANCE_LINES = []


def record_acceptance(line):
    """Collect a criterion verdict line for the end-of-session summary."""
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=_backend.available())
def kern(request):
    """Each available kernel backend in turn."""
    return _backend.load(request.param)


@pytest.fixture(scope="session")
def catalogue():
    return default_catalogue()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
