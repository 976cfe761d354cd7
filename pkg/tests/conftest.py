import numpy as np
import pytest

from wbcsim.model import MinimalState, RobotDescription, RobotModel
from wbcsim.rotations import exp_so3


@pytest.fixture(scope="session")
def model():
    return RobotModel(RobotDescription.default())


def random_minimal_state(rng: np.random.Generator, with_velocity: bool = True) -> MinimalState:
    """Random non-singular configuration with modest base tilt."""
    pos = rng.uniform(-1.0, 1.0, 3) + np.array([0.0, 0.0, 0.5])
    rot = exp_so3(rng.uniform(-0.4, 0.4, 3))
    hips = rng.uniform(-0.8, 1.2, 2)
    knees = rng.uniform(-2.2, -0.3, 2)
    wheels = rng.uniform(-3.0, 3.0, 2)
    qj = np.array([hips[0], knees[0], wheels[0], hips[1], knees[1], wheels[1]])
    vel = rng.uniform(-1.0, 1.0, 12) if with_velocity else np.zeros(12)
    return MinimalState(pos=pos, rot=rot, qj=qj, vel=vel)
