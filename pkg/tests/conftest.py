import numpy as np
import pytest

from pdeforge.domain import make_grid, registry_get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rd_task():
    return registry_get("reaction_diffusion")


@pytest.fixture
def rd_grid(rd_task):
    return make_grid(rd_task, 32, 4, t_end=0.05)
