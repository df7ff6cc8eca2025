import numpy as np
import pytest

from surfvortex import metrics as mt
from surfvortex.greens import GreensEvaluator


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def round16():
    return mt.round_metric(16)


@pytest.fixture(scope="session")
def spheroid32():
    return mt.spheroid_metric(1.0, 0.8, 32)


@pytest.fixture(scope="session")
def ellipsoid32():
    return mt.ellipsoid_metric(1.2, 1.0, 0.8, 32)


@pytest.fixture(scope="session")
def ev_round(round16):
    return GreensEvaluator(round16)


@pytest.fixture(scope="session")
def ev_spheroid(spheroid32):
    return GreensEvaluator(spheroid32)


@pytest.fixture(scope="session")
def ev_ellipsoid(ellipsoid32):
    return GreensEvaluator(ellipsoid32)
