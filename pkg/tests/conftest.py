import numpy as np
import pytest

from inls import groundstate as gsm
from inls.grid import radial_grid
from inls.interaction import scalar_quadratic, two_wave

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one summary line per acceptance criterion."""
    def record(num, ok, text):
        ACCEPTANCE[num] = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {text}"
        print(ACCEPTANCE[num])
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def scalar_gs():
    spec = scalar_quadratic(3, 0.5)
    return spec, gsm.solve(spec, 1.0, radial_grid(3, 4096, 40.0, 0.5))


@pytest.fixture(scope="session")
def two_wave_gs():
    """Threshold ground state: omega = 1, beta = 0, n = 3, b = 0.6."""
    spec = two_wave(3, 0.6)
    return spec, gsm.solve(spec, 1.0, radial_grid(3, 4096, 40.0, 0.6))


@pytest.fixture(scope="session")
def small_two_wave_gs():
    spec = two_wave(3, 0.6)
    return spec, gsm.solve(spec, 1.0, radial_grid(3, 1024, 20.0, 0.6))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
