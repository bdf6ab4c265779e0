import numpy as np
import pytest

from espec.model import Grid, make_params


@pytest.fixture
def params10():
    """(mu, lambda) = (1, 0): pressure speed squared 2."""
    return make_params(1.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def grid1(L=4.0, n=99):
    return Grid(1, L, n)
