import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rendex.grid_map import FREE, OCCUPIED, SensorModel, VoxelMap, WorldModel
from rendex.grid_map import evenly_spaced_yaws


@pytest.fixture
def small_world():
    """12 x 12 x 8 voxel open room at r = 0.2 with a full-height wall slab
    at ix = 4."""
    world = WorldModel((12, 12, 8), 0.2, ground_z=0.3)
    world.truth[4, :, :] = OCCUPIED
    return world


@pytest.fixture
def open_world():
    world = WorldModel((12, 12, 8), 0.2, ground_z=0.3)
    return world


@pytest.fixture
def uav_sensor():
    return SensorModel(1.0, 90.0, 90.0, evenly_spaced_yaws(4), "aerial")


@pytest.fixture
def ugv_sensor():
    return SensorModel(5.0, 360.0, 30.0, (), "ground")


def make_random_world(rng, dims=(14, 14, 7), n_boxes=3, resolution=0.2):
    """Random pillars-on-floor world for property tests."""
    world = WorldModel(dims, resolution, ground_z=0.3)
    ext = world.extent()
    for _ in range(n_boxes):
        sx = rng.uniform(0.3, 0.9)
        sy = rng.uniform(0.3, 0.9)
        x0 = rng.uniform(0.4, ext[0] - sx - 0.4)
        y0 = rng.uniform(0.4, ext[1] - sy - 0.4)
        h = rng.uniform(0.4, ext[2] - 0.4)
        world.add_box((x0, y0, 0.0), (x0 + sx, y0 + sy, h))
    return world
