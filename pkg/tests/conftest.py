from pathlib import Path

import numpy as np
import pytest

from qutrit_lg.noise import NoiseModel
from qutrit_lg.protocol import RotationDynamics, Schedule

from . import support


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20190509)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return support.DATA_DIR


@pytest.fixture(scope="session")
def dynamics() -> RotationDynamics:
    return RotationDynamics()


@pytest.fixture(scope="session")
def schedule() -> Schedule:
    return Schedule()


@pytest.fixture(scope="session")
def fitted_model() -> NoiseModel:
    return NoiseModel.load_profile()
