import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", max_examples=40, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def unit_sphere():
    from hotspots.fiber import sphere_spectrum

    return sphere_spectrum(2, 1.0, 64)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


_CRITERIA: dict = {}


@pytest.fixture
def record_criterion():
    """Store a one-line pass/fail result for the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _CRITERIA[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
