"""Soft-bubble tactile sensor simulator and perception pipeline."""

__version__ = "0.1.0"

from .geometry import (
    DepthImage,
    FrameGraph,
    PinholeCamera,
    PointCloud,
    RigidTransform,
    TriangleMesh,
    compose,
    deproject,
    invert,
    ray_cast,
)
from .membrane import (
    BubbleConfig,
    HeightField,
    ObstacleField,
    build_obstacle,
    contact_mask,
    rest_shape,
    sentinel_obstacle,
    solve_membrane,
)
from .render import NoiseModel, SensorRig, apply_noise, frame_stream, render_depth
from .touch import (
    ContactPatch,
    ReferenceFrame,
    TouchConfig,
    capture_reference,
    extract_contact,
    is_touch,
)

__all__ = [
    "BubbleConfig",
    "ContactPatch",
    "DepthImage",
    "FrameGraph",
    "HeightField",
    "NoiseModel",
    "ObstacleField",
    "PinholeCamera",
    "PointCloud",
    "ReferenceFrame",
    "RigidTransform",
    "SensorRig",
    "TouchConfig",
    "TriangleMesh",
    "apply_noise",
    "build_obstacle",
    "capture_reference",
    "compose",
    "contact_mask",
    "deproject",
    "extract_contact",
    "frame_stream",
    "invert",
    "is_touch",
    "ray_cast",
    "rest_shape",
    "render_depth",
    "sentinel_obstacle",
    "solve_membrane",
]
