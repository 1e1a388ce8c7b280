import numpy as np
import pytest

from vibpol.core import SystemParams, block_eigensystems
from vibpol.liouvillian import decompose


@pytest.fixture(scope="session")
def wco6():
    return SystemParams.w_co6()


@pytest.fixture(scope="session")
def wco6_eigs(wco6):
    return block_eigensystems(wco6)


@pytest.fixture(scope="session")
def wco6_spec(wco6):
    return decompose(wco6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
