import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pdolearn.wavelets import WaveletBasis, WaveletParams

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def basis24():
    return WaveletBasis(WaveletParams(d=2, dt=4, Jmax=8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_sigma_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="sigma=")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
