"""Shared fixtures: default sensor configuration and cached rest-state data."""

import numpy as np
import pytest

from softbubble.membrane import (
    BubbleConfig,
    ObstacleField,
    grid_for,
    rest_shape,
)
from softbubble.render import SensorRig, render_depth
from softbubble.touch import capture_reference


@pytest.fixture(scope="session")
def cfg():
    return BubbleConfig()


@pytest.fixture(scope="session")
def coarse_cfg():
    # 2 mm grid: same physics, ~4x fewer nodes, for solver-heavy tests
    return BubbleConfig(grid_spacing=2.0)


@pytest.fixture(scope="session")
def rig(cfg):
    return SensorRig(bubble=cfg)


@pytest.fixture(scope="session")
def rest_hf(cfg):
    return rest_shape(cfg)


@pytest.fixture(scope="session")
def rest_img(rig, rest_hf):
    return render_depth(rig, rest_hf)


@pytest.fixture(scope="session")
def reference(rest_img):
    return capture_reference([rest_img])


def plate_obstacle(cfg, height):
    """Constant obstacle at the given height over the whole rim disk."""
    g = grid_for(cfg)
    return ObstacleField(cfg, np.full((g.n, g.n), float(height)))
