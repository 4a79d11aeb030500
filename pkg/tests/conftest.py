import numpy as np
import pytest

from dispersal.kernels import paper_kernel
from dispersal.model import make_beta23_model


@pytest.fixture(scope="session")
def beta():
    return make_beta23_model()


@pytest.fixture(scope="session")
def pk():
    return paper_kernel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
