import numpy as np
import pytest

from nvmix.models import GIG, GigParams, MixtureModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def gig111():
    return GigParams(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def gh_model(gig111):
    return MixtureModel(0.5, GIG(gig111))


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
