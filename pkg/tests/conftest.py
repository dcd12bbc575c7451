import numpy as np
import pytest

from photonstat.montecarlo import DetectorConfig, EmitterConfig, detect, simulate_emission
from photonstat.photophysics import TABLE1, steady_state
from photonstat.photophysics import _g2_coefficients


def fano_factor(rates, phi_F=1.0, efficiency=1.0):
    """Var(N)/<N> of photon counts over long windows, from the analytic g2."""
    A, a, B, b = _g2_coefficients(rates)
    rate = steady_state(rates).rho1 * rates.inv_T1 * phi_F * efficiency
    return 1.0 + 2.0 * rate * (A / a - B / b)


@pytest.fixture(scope="session")
def table1_emissions():
    return simulate_emission(EmitterConfig(TABLE1, phi_F=1.0, duration=0.05, seed=2024))


@pytest.fixture(scope="session")
def table1_stream(table1_emissions):
    return detect(table1_emissions, DetectorConfig(), seed=7, duration=0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record and assert one acceptance criterion; lines are echoed in the summary."""
    results = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number, title, ok, detail):
        line = f"criterion {number:>2}  {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        results.append((number, line))
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results):
            terminalreporter.write_line(line)
