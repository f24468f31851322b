import numpy as np
import pytest

from vr_gcs.dynamics import VehicleParams
from vr_gcs.world import Box, WorldModel

WALL_BOX = ([4.8, -2.0, 0.0], [5.0, 2.0, 3.0])


@pytest.fixture
def params():
    return VehicleParams()


@pytest.fixture
def wall_world():
    """The experiment scene: a 4 m wide wall 4.8 m ahead of the origin."""
    return WorldModel(obstacles=[Box(np.array(WALL_BOX[0]),
                                     np.array(WALL_BOX[1]))],
                      name="wall")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
