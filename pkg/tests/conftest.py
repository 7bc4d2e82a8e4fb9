import pytest

from driven_level.flux import trace_period
from driven_level.model import ModelParams

SLOW = ModelParams()  # eps0=-1.2, V_ac=10, hbar*Omega=1e-3, mu=0, T=0
MODERATE = ModelParams(epsilon0=-1.2, v_ac=1.0, omega=0.5)


@pytest.fixture(scope="session")
def slow():
    return SLOW


@pytest.fixture(scope="session")
def moderate():
    return MODERATE


@pytest.fixture(scope="session")
def slow_trace():
    return trace_period(SLOW, n_times=256)


@pytest.fixture(scope="session")
def moderate_trace():
    return trace_period(MODERATE, n_times=256)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
