import numpy as np
import pytest

from rperp.spectra import ArModel, ar_to_psd

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ar09():
    return ArModel((0.9,), 1.0)


@pytest.fixture(scope="session")
def ar09_psd(ar09):
    return ar_to_psd(ar09, 4096)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n, cond=50.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.geomspace(1.0, cond, n) * rng.uniform(0.5, 2.0)
    return (Q * lam) @ Q.T


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
