import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ampcap.circuit import CircuitParams, FrequencyGrid

settings.register_profile(
    "ampcap", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ampcap")


@pytest.fixture(scope="session")
def reference_circuit():
    """g_d/g_m = 0.1 with g_o = g_d."""
    return CircuitParams(g_d=0.1)


@pytest.fixture(scope="session")
def default_grid():
    return FrequencyGrid.symmetric()


@pytest.fixture(scope="session")
def small_grid():
    return FrequencyGrid.symmetric(50.0, 1024, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report_criterion(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def report(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines.append(line)
        with capman.global_and_fixture_disabled():
            print(f"\n{line}")
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
