import os

import numpy as np
import pytest

import _acceptance_log
from milsunwrap import case_study_config
from milsunwrap.montecarlo import calibrate_from_pool, phase_variance_db, simulate_pool

CALIB_SEED = 20240
POOL_SEED = 1


@pytest.fixture(scope="session")
def cfg():
    return case_study_config()


@pytest.fixture(scope="session")
def sigma_sq_25():
    return phase_variance_db(25.0)


@pytest.fixture(scope="session")
def pool_25db(cfg):
    """10^4 independent trials at 25 dB."""
    return simulate_pool(cfg, 25.0, 10_000, seed=POOL_SEED)


@pytest.fixture(scope="session")
def calibration_25db(cfg):
    """Full-size (10^5 trial) calibration at 25 dB for a 5% false-acceptance target."""
    import time

    t0 = time.perf_counter()
    pool = simulate_pool(cfg, 25.0, 100_000, seed=CALIB_SEED, threads=os.cpu_count() or 1)
    cal = calibrate_from_pool(pool, 0.05)
    return cal, time.perf_counter() - t0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_log.LINES:
            terminalreporter.write_line(line)
