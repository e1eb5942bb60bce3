import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irs6d.scene import default_scenario, make_codebooks, synthesize_channels
from irs6d.validation import small_instance

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")  # fixtures below are never mutated

INF = float("inf")
RX3 = [-46.0, 6.0, 10.0]


@pytest.fixture
def los():
    """Reference deployment with pure LoS channels."""
    return default_scenario(rician_factor_db=INF)


@pytest.fixture
def los3():
    sc = default_scenario(rician_factor_db=INF)
    return sc.replace(p_rx=np.vstack([sc.p_rx, RX3]))


@pytest.fixture
def small():
    return small_instance(0)


@pytest.fixture
def los_link(los):
    cb = make_codebooks(los, 1)
    ch = synthesize_channels(los, 2)
    return los, cb, ch


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
