"""Virtual internal depth camera: height-field rendering plus parameterized
near-range artifact models (range noise, emitter-offset dark band, glare)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from .geometry import DepthImage, GeometryError, PinholeCamera
from .membrane import BubbleConfig, HeightField, grid_for

MAX_FRAME_RATE = 45.0  # fps, sensor limit


@dataclass(frozen=True)
class SensorRig:
    """Camera on the bubble axis, optical center `standoff` mm below the rim
    plane, looking along +z toward the membrane."""

    camera: PinholeCamera = field(default_factory=PinholeCamera)
    standoff: float = 104.0  # mm
    bubble: BubbleConfig = field(default_factory=BubbleConfig)

    def __post_init__(self):
        # necessary condition for the full FOV to land on the membrane: the
        # corner ray reaches the rim plane inside the rim circle
        th = math.tan(math.radians(self.camera.hfov_deg) / 2)
        tv = math.tan(math.radians(self.camera.vfov_deg) / 2)
        corner = self.standoff * math.hypot(th, tv)
        if corner >= self.bubble.rim_radius:
            raise GeometryError(
                "camera standoff too large: FOV footprint exceeds the rim disk"
            )

    def in_fov_membrane_area(self, hf: HeightField) -> float:
        """Membrane surface area (mm^2) visible to the camera."""
        g = grid_for(self.bubble)
        x, y = g.meshgrid()
        z = hf.z
        th = math.tan(math.radians(self.camera.hfov_deg) / 2)
        tv = math.tan(math.radians(self.camera.vfov_deg) / 2)
        reach = z + self.standoff
        fov = g.interior & (np.abs(x) <= reach * th) & (np.abs(y) <= reach * tv)
        gx, gy = np.gradient(z, g.spacing, g.spacing)
        da = np.sqrt(1.0 + gx * gx + gy * gy) * g.spacing * g.spacing
        return float(da[fov].sum())


@dataclass(frozen=True)
class DarkRegionModel:
    enabled: bool = False
    emitter_offset: float = 10.0  # mm, lateral (+x) offset of the IR emitter
    bias_fraction: float = 0.05  # depths read further by this fraction


@dataclass(frozen=True)
class GlareModel:
    enabled: bool = False
    incidence_threshold_deg: float = 5.0  # near-normal incidence drops out
    dropout_probability: float = 0.9


@dataclass(frozen=True)
class NoiseModel:
    gaussian_sigma_fraction: float = 0.01
    dark_region: DarkRegionModel = field(default_factory=DarkRegionModel)
    glare: GlareModel = field(default_factory=GlareModel)
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_sigma_fraction > 0.02:
            raise ValueError(
                "gaussian sigma fraction exceeds the 2% sensor resolution bound"
            )

    def disabled(self) -> bool:
        return (
            self.gaussian_sigma_fraction == 0.0
            and not self.dark_region.enabled
            and not self.glare.enabled
        )


def render_depth(rig: SensorRig, hf: HeightField) -> DepthImage:
    """Cast per-pixel rays against the membrane (bilinear patches over the
    grid); depth is z-distance from the camera plane, 0 where a ray misses."""
    g = grid_for(rig.bubble)
    a, b = rig.camera.pixel_rays()
    z_top = float(hf.z.max()) + 1.0
    depth = _accel.raycast_heightfield(
        np.ascontiguousarray(a),
        np.ascontiguousarray(b),
        rig.standoff,
        hf.z,
        float(g.xs[0]),
        g.spacing,
        z_top,
        rig.bubble.rim_radius,
        64,
        48,
    )
    return DepthImage(depth)


def _surface_normals(img: DepthImage, cam: PinholeCamera):
    """Per-pixel unit normals from central differences of deprojected points."""
    a, b = cam.pixel_rays()
    d = img.data
    pts = np.stack([a * d, b * d, d], axis=-1)
    du = np.gradient(pts, axis=1)
    dv = np.gradient(pts, axis=0)
    n = np.cross(du, dv)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    norm[norm == 0] = 1.0
    return pts, n / norm


def apply_noise(img: DepthImage, noise: NoiseModel, cam: PinholeCamera) -> DepthImage:
    """Multiplicative range noise, one-sided dark-region bias and glare
    dropout; deterministic for a given seed."""
    if noise.disabled():
        return DepthImage(img.data.copy())
    rng = np.random.default_rng(noise.seed)
    data = img.data.copy()
    valid = img.valid
    if noise.gaussian_sigma_fraction > 0.0:
        draws = rng.standard_normal(data.shape)
        data[valid] *= 1.0 + noise.gaussian_sigma_fraction * draws[valid]
    if noise.dark_region.enabled:
        # lit iff the surface point also falls inside the emitter's frustum
        a, b = cam.pixel_rays()
        clean = img.data
        x = a * clean
        y = b * clean
        th = math.tan(math.radians(cam.hfov_deg) / 2)
        tv = math.tan(math.radians(cam.vfov_deg) / 2)
        off = noise.dark_region.emitter_offset
        lit = (np.abs(x - off) <= clean * th) & (np.abs(y) <= clean * tv)
        dark = valid & ~lit
        data[dark] *= 1.0 + noise.dark_region.bias_fraction
    if noise.glare.enabled:
        pts, normals = _surface_normals(img, cam)
        rays = pts / np.maximum(np.linalg.norm(pts, axis=-1, keepdims=True), 1e-9)
        cos_i = np.abs(np.einsum("...k,...k->...", rays, normals))
        near_normal = valid & (
            cos_i > math.cos(math.radians(noise.glare.incidence_threshold_deg))
        )
        u = rng.random(data.shape)
        data[near_normal & (u < noise.glare.dropout_probability)] = 0.0
    return DepthImage(data)


def frame_stream(
    rig: SensorRig,
    heightfields,
    rate: float,
    noise: NoiseModel | None = None,
):
    """Render a sequence of solved membrane states at a fixed timestep.

    Yields (timestamp_s, DepthImage); per-frame noise seeds are derived from
    the model seed so streams are reproducible.
    """
    if rate > MAX_FRAME_RATE:
        raise ValueError(f"frame rate {rate} exceeds the {MAX_FRAME_RATE} fps limit")
    if rate <= 0:
        raise ValueError("frame rate must be positive")
    dt = 1.0 / rate
    for k, hf in enumerate(heightfields):
        img = render_depth(rig, hf)
        if noise is not None and not noise.disabled():
            frame_seed = int(
                np.random.SeedSequence([noise.seed, k]).generate_state(1)[0]
            )
            img = apply_noise(
                img,
                NoiseModel(
                    noise.gaussian_sigma_fraction,
                    noise.dark_region,
                    noise.glare,
                    frame_seed,
                ),
                rig.camera,
            )
        yield k * dt, img


def write_stream_manifest(path, entries):
    """entries: iterable of dicts with frame, timestamp, file, seed."""
    Path(path).write_text(json.dumps({"frames": list(entries)}, indent=2) + "\n")
