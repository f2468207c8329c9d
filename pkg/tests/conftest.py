import numpy as np
import pytest

from hypercluster import calibration


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def calibrated():
    return calibration.calibrate_noise()
