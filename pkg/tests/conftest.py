import math
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from takagi.core import TakagiParams

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

PHI = (1 + math.sqrt(5)) / 2

# Filled by test_acceptance; echoed after the run so `pytest -v | tee` keeps them.
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def classical():
    return TakagiParams(0.5, 2)


@pytest.fixture(scope="session")
def golden():
    return TakagiParams(PHI / 8, 8)


def exact_partial_sum(a, b, x, N):
    """Exact rational ``sum_{n<=N} a**n T(b**n x)`` for float inputs."""
    a, x = Fraction(a), Fraction(x)
    total = Fraction(0)
    y = x - math.floor(x)
    an = Fraction(1)
    for _ in range(N + 1):
        total += an * min(y, 1 - y)
        y = (y * b) % 1
        an *= a
    return total


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
