import numpy as np
import pytest

from hwsir.size_dist import SizeDistribution, default_household, default_workplace

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    def _report(number, passed, detail):
        ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def pi_H():
    return default_household()


@pytest.fixture(scope="session")
def pi_W():
    return default_workplace()


@pytest.fixture(scope="session")
def pi_W10():
    return default_workplace().truncate(10)


@pytest.fixture(scope="session")
def small_pis():
    return (SizeDistribution.from_mapping({1: 0.2, 2: 0.5, 3: 0.3}),
            SizeDistribution.from_mapping({1: 0.1, 2: 0.2, 4: 0.4, 6: 0.3}))
